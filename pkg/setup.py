from setuptools import setup, find_packages


setup(
    name="selfsim-lrp",
    version="0.1.0",
    description="Simulation lab for critical long-range percolation with the self-similar kernel.",
    packages=find_packages(include=["lrp", "lrp.*"]),
    install_requires=[
        "numpy>=1.24",
        "pydantic>=2.7.1",
        "python-dotenv>=1.0.1",
        "scipy>=1.11",
    ],
    extras_require={
        "test": ["pytest>=7.4", "networkx>=3.1"],
    },
    entry_points={
        "console_scripts": ["lrp = lrp.cli.main:main"],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
