# setup.py
from setuptools import setup, find_packages

setup(
    name="custmom",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"custmom": ["config.yaml"]},
    install_requires=[
        "linearmodels",
        "numpy",
        "pandas>=1.5",
        "pyyaml",
        "scipy",
        "statsmodels",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["custmom = custmom.pipeline:main"]},
    python_requires=">=3.9",
    description="Customer momentum asset-pricing study: supply-chain signals, portfolio sorts, factors and regressions.",
)
