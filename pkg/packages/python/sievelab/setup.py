# Needed by pip even if we only run the package from the repository
from setuptools import find_packages, setup

setup(
    name="sievelab",
    version="0.1",
    packages=find_packages(),
    install_requires=[
        "numpy>=1.26",
        "scipy>=1.11",
        "pandas>=2.1",
        "typer>=0.9",
        "typing_extensions>=4.8",
    ],
)
