from setuptools import setup, find_packages


setup(
    name='mstcn',
    version='0.1.0dev1',
    description=('Multimodal temporal convolutional networks for '
                 'multi-label context recognition from smartphone and '
                 'smartwatch sensors.'),
    license='Apache License, Version 2.0',
    python_requires=">=3.6",
    packages=find_packages(),
    install_requires=['distributed', 'numdifftools', 'numpy', 'scipy',
                      'threadpoolctl'],
    extras_require={'test': ['pytest', 'scikit-learn']},
    entry_points={'console_scripts': ['mstcn=mstcn.cli:main']},
)
