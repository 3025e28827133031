# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import sys

from edft.cores.runner.cli import main

sys.exit(main())
