"""
setuptools script for DagDelay
Usage: pip install -e .
"""

from setuptools import find_packages, setup

setup(
    name='DagDelay',
    version='1.0.0',
    description='DagDelay - DAG-BFT latency simulator',
    packages=find_packages(include=['src', 'src.*']),
    py_modules=['main'],
    python_requires='>=3.10',
    install_requires=['numpy>=1.24.0', 'tomli>=2.0; python_version<"3.11"'],
    extras_require={'test': ['pytest>=7.4.0', 'hypothesis>=6.90.0']},
    entry_points={'console_scripts': ['dagdelay=src.app:main']},
)
