# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import os
from functools import wraps

from opentelemetry import trace
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, SimpleSpanProcessor
from opentelemetry.sdk.trace.export.in_memory_span_exporter import InMemorySpanExporter

from ..common.logger import logger

# Result attributes copied onto the span when the wrapped call returns them.
RESULT_ATTRIBUTES = ("converged", "iterations", "algorithm")

provider = TracerProvider(resource=Resource.create({SERVICE_NAME: "edft"}))
in_memory_exporter = InMemorySpanExporter()
provider.add_span_processor(SimpleSpanProcessor(in_memory_exporter))

telemetry_endpoint = os.environ.get("TELEMETRY_ENDPOINT")
if telemetry_endpoint:
    from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter

    provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=telemetry_endpoint)))
    logger.info(f"exporting solver spans to {telemetry_endpoint}")

trace.set_tracer_provider(provider)
tracer = provider.get_tracer("edft")


def _annotate(span, result):
    for name in RESULT_ATTRIBUTES:
        value = getattr(result, name, None)
        if isinstance(value, (bool, int, float, str)):
            span.set_attribute(f"edft.{name}", value)
        elif value is not None:
            span.set_attribute(f"edft.{name}", str(value))


def edft_telemetry(func):
    """Run ``func`` inside a span named after it."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        with tracer.start_as_current_span(func.__name__) as span:
            result = func(*args, **kwargs)
            _annotate(span, result)
        return result

    return wrapper
