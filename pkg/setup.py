from setuptools import setup, find_packages

setup(
    name='skewsim',
    version='0.1.0',
    packages=find_packages(exclude=['tests', 'tests.*']),
    install_requires=[
        'rich>=13.0.0',
        'click>=8.0.0',
        'pyyaml>=6.0.0',
        'numpy>=1.22.0',
        'scipy>=1.8.0',
    ],
    extras_require={
        'test': ['pytest>=7.0.0'],
    },
    entry_points={
        'console_scripts': [
            'skewsim=skewsim.cli:main',
        ],
    },
    python_requires='>=3.8',
    author='skewsim',
    description='Transition densities and exact sampling of skew Brownian motion with two semipermeable barriers',
)
