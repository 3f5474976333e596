import io
import os
import re

from setuptools import find_packages, setup


def read(name):
    """Text of a file next to setup.py, with Sphinx roles turned into literals for PyPI."""
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), name)
    with io.open(path, encoding="utf-8") as handle:
        return re.sub(r":[a-z]+:`~?(.*?)`", r"``\1``", handle.read())


setup(
    name="ehdecode",
    version="2026.10.0",
    license="MIT",
    description="Throughput-optimal power policies for energy harvesting networks with decoding costs",
    long_description=read("README.md"),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests",)),
    install_requires=[
        "numpy>=1.23",
        "pandas>=1.5",
        "scipy>=1.10.1",
        "tqdm",
    ],
    entry_points={"console_scripts": ["ehdecode=ehdecode.cli:main"]},
    classifiers=[
        "Development Status :: 2 - Pre-Alpha",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.9",
    ],
)
