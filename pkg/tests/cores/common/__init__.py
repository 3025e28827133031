# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
