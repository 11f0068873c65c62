from setuptools import setup

from subwalk._version import __version__

with open('README.md') as f:
    readme = f.read()

setup(
    name="subwalk",
    version=__version__,
    author="subwalk developers",
    description='Discrete subordination of lattice random walks, with a py.test plugin for verification suites',
    long_description=readme,
    long_description_content_type="text/markdown",
    packages = ['subwalk'],
    # the following makes a plugin available to pytest
    entry_points = {
        'pytest11': [
            'subwalk = subwalk.plugin',
        ],
        'console_scripts': [
            'subwalk = subwalk.cli:main',
        ],
    },
    install_requires = [
        'pytest>=7.0',
        'numpy',
        'scipy>=1.6',
        'joblib',
        'pandas>=1.5'
    ],
    python_requires='>=3.8, <4',
    classifiers = [
        'Framework :: Pytest',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Mathematics',
    ]
)
