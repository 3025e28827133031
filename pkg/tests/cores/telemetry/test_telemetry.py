# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import unittest
from types import SimpleNamespace

from edft import edft_telemetry
from edft.cores.telemetry.edft_telemetry import in_memory_exporter


@edft_telemetry
def dummy_phase_child():
    return 1


@edft_telemetry
def dummy_phase():
    return dummy_phase_child() + 1


@edft_telemetry
def dummy_solve():
    return SimpleNamespace(converged=True, iterations=7)


class TestTelemetry(unittest.TestCase):
    def setUp(self):
        in_memory_exporter.clear()

    def test_span_names(self):
        self.assertEqual(dummy_phase(), 2)
        names = sorted(span.name for span in in_memory_exporter.get_finished_spans())
        self.assertEqual(names, ["dummy_phase", "dummy_phase_child"])
        in_memory_exporter.clear()

    def test_call_tracing(self):
        dummy_phase()
        spans = {span.name: span for span in in_memory_exporter.get_finished_spans()}
        self.assertEqual(
            spans["dummy_phase"].get_span_context().trace_id, spans["dummy_phase_child"].parent.trace_id
        )
        self.assertEqual(
            spans["dummy_phase"].get_span_context().span_id, spans["dummy_phase_child"].parent.span_id
        )
        in_memory_exporter.clear()

    def test_result_attributes(self):
        dummy_solve()
        (span,) = in_memory_exporter.get_finished_spans()
        self.assertEqual(span.attributes["edft.converged"], True)
        self.assertEqual(span.attributes["edft.iterations"], 7)
        self.assertNotIn("edft.algorithm", span.attributes)


if __name__ == "__main__":
    unittest.main()
