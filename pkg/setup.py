from setuptools import setup, find_packages

from torch_lencon import __version__

setup(
    name='torch_lencon',
    version=__version__,
    description='Length-controllable attentional encoder-decoders with pytorch',
    url='http://github.com/strongio/torch_lencon',
    author='Jacob Dink',
    author_email='jacob.dink@strong.io',
    license='MIT',
    packages=find_packages(include=['torch_lencon', 'torch_lencon.*']),
    zip_safe=False,
    install_requires=[
        'torch>=1.8',
        'numpy>=1.17',
        'tqdm>=4.0',
        'lazy_object_proxy>=1.4',
        'parameterized>=0.7'
    ],
    entry_points={
        'console_scripts': ['lencon=torch_lencon.cli:main']
    },
    test_suite='nose.collector',
    tests_require=['nose']
)
