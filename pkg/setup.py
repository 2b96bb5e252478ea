import setuptools

with open('README.md', 'r') as fh:
    long_description = fh.read()

setuptools.setup(
    name='coldrec',
    version='0.1.0',
    author='coldrec contributors',
    description='Cold-start top-n item recommendation with factorized bilinear feature similarity',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=setuptools.find_packages(exclude=['tests']),
    install_requires=['psutil>=5.3', 'numpy>=1.20', 'scipy>=1.6'],
    extras_require={'test': ['pytest>=7']},
    entry_points={'console_scripts': ['coldrec=coldrec.__main__:main']},
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Information Analysis'
    ],
    python_requires='>=3.8'
)
