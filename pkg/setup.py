from setuptools import setup, find_packages

setup(
    name="nearbest",
    version="0.1.0",
    description="Near-best polynomial approximants of piecewise analytic functions on arcs",
    author="Your Name",
    author_email="youremail@example.com",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    entry_points={
        "console_scripts": [
            "nearbest = nearbest.__main__:main",
        ],
    },
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "matplotlib>=3.7",
        "pydantic>=2.10",
        "typer>=0.9.0",
        "click>=8.1.0",
        "filelock>=3.0.0",
    ],
    extras_require={
        "test": ["pytest==8.3.4"],
    },
    python_requires=">=3.9",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
)
