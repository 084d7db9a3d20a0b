from setuptools import setup, find_packages

setup(
    name="adaptive-ate-simulator",
    version="0.1.0",
    description="Simulation library for adaptive average-treatment-effect estimation with OPTrack",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.26.2",
        "pandas>=2.1.4",
        "matplotlib>=3.8.2",
        "python-dotenv>=1.0.0",
        "loguru>=0.7.2",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-cov>=4.1.0",
            "pytest-mock>=3.12.0",
            "black>=23.12.0",
            "flake8>=6.1.0",
            "mypy>=1.7.1",
        ]
    },
    entry_points={
        "console_scripts": [
            "optrack-sim=src.cli.main:cli",
        ]
    },
)
