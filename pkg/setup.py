from setuptools import setup
import os

VERSION = "0.1"


def get_long_description():
    with open(
        os.path.join(os.path.dirname(os.path.abspath(__file__)), "README.md"),
        encoding="utf8",
    ) as fp:
        return fp.read()


setup(
    name="heegner-heights",
    description="Neron-Tate heights of Heegner points on J_0(N) via the Gross-Zagier formula",
    long_description=get_long_description(),
    long_description_content_type="text/markdown",
    license="Apache License, Version 2.0",
    version=VERSION,
    packages=["heegner_heights"],
    entry_points={"console_scripts": ["heegner-heights = heegner_heights.cli:cli"]},
    install_requires=["click", "sqlite-utils", "numpy", "scipy", "sympy"],
    extras_require={"test": ["pytest", "mpmath"]},
    tests_require=["heegner-heights[test]"],
    python_requires=">=3.8",
)
