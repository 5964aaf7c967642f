from setuptools import setup, find_packages

setup(
    name="regretobserver",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy",
    ],
    extras_require={
        "test": [
            "pytest",
            "scipy",
            "cvxpy",
        ],
    },
    package_data={"": ["*.sys"]},
    entry_points={
        "console_scripts": [
            "regretobserver=regretobserver.regretobserver_cli:main",
        ],
    },
)
