#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import re
from pathlib import Path

from setuptools import find_packages, setup

HERE = Path(__file__).parent


def read_version():
    text = (HERE / "edft" / "version.py").read_text()
    match = re.search(r'__version__ = "(.*)"', text)
    if match is None:
        raise RuntimeError("edft/version.py does not define __version__")
    return match.group(1)


def read_requirements(name="requirements.txt"):
    lines = (HERE / name).read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


if __name__ == "__main__":
    setup(
        name="edft",
        version=read_version(),
        description="Ensemble Kohn-Sham free energy minimization with an adaptive double-step PCG",
        long_description=(HERE / "README.md").read_text(encoding="utf-8"),
        long_description_content_type="text/markdown",
        keywords="DFT, Kohn-Sham, smearing, conjugate gradient, SCF",
        license="Apache 2.0",
        packages=find_packages(include=["edft", "edft.*"]),
        package_data={"edft.cores.runner": ["fixtures/*.yaml"]},
        include_package_data=True,
        install_requires=read_requirements(),
        entry_points={"console_scripts": ["edft=edft.cores.runner.cli:main"]},
        python_requires=">=3.8",
        classifiers=[
            "Intended Audience :: Science/Research",
            "Programming Language :: Python :: 3",
            "Topic :: Scientific/Engineering :: Physics",
            "Topic :: Scientific/Engineering :: Chemistry",
            "License :: OSI Approved :: Apache Software License",
        ],
    )
