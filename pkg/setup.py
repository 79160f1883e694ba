import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setuptools.setup(
    name='pinnwave',
    version='1.0.0',
    description='Physics-informed neural networks for damped and semilinear wave equations with a-posteriori and a-priori error bounds',
    long_description=long_description,
    long_description_content_type="text/markdown",
    license='MIT',
    python_requires='>=3.8',
    packages=['pinnwave'],
    install_requires=['numpy>=1.22', 'scipy>=1.8', 'mpmath>=1.3.0', 'sympy>=1.11', 'tqdm>=4.64'],
    extras_require={'gpu': ['cupy>=12.0'], 'test': ['pytest>=7.0']},
    entry_points={'console_scripts': ['pinnwave=pinnwave.cli:main']}
)
