#!/usr/bin/env python

from setuptools import setup, find_packages

with open("README.md", "r") as fh:
    long_description = fh.read()


setup(
    name='pyngts',
    version="0.1.1",
    description='Neighbor-grouped tabu search MIMO detection with operation counting',
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Communications',
    ],
    keywords=['MIMO', 'tabu search', 'detection', 'sphere decoding'],
    author='pyngts contributors',
    license='http://www.opensource.org/licenses/bsd-license.php',
    platforms = ['any'],
    packages=find_packages(
        include=['pyngts', 'pyngts.errors', 'pyngts.tests', 'pyngts.tests.ressources'],
        exclude=["__pycache__",]
    ),
    include_package_data=True,
    package_data={
        '': ['*.md'],
        'pyngts.tests': ['ressources/*.cfg']
    },
    python_requires='>=3.9',
    install_requires=['numpy', 'lxml'],
    tests_require=['mock'],
    entry_points={
        'console_scripts': ['pyngts=pyngts.cli:main'],
    },
)
