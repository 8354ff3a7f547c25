from setuptools import setup


setup(
    name='hipnex',
    description='Homotopy inexact proximal-Newton extragradient solver for monotone variational inequalities',
    version='0.1dev1',
    packages=[
        'hipnex',
        'hipnex.variational',
    ],
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.3',
    ],
    tests_require=[
        'mock',
        'pytest',
    ],
    entry_points={
        'console_scripts': [
            'hipnex = hipnex.cli:main',
        ],
    },
    python_requires='>=3.6',
    license='MIT',
)
