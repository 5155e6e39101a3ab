from setuptools import setup, find_packages

setup(
    name="timescale_volterra",
    version="0.1.0",
    packages=find_packages(include=["src", "src.*"]),
    install_requires=[
        "pydantic>=2.0.0",
        "pydantic-settings>=2.0.0",
        "numpy>=1.24",
        "click>=8.0",
    ],
    entry_points={"console_scripts": ["tsvolterra=src.cli.main:cli"]},
)
