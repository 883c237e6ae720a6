from setuptools import setup

cpocma = {}
with open('cpocma/__init__.py') as ver_file:
    exec(ver_file.read().split('\nfrom cpocma.core import')[0], cpocma)

setup(
    name="cpocma",
    version=cpocma['__version__'],
    packages=['cpocma'],
    author=cpocma['__author__'],
    license='MIT',
    description="Simulation library for chaotic pseudo-orthogonal carriers multi-access (CPOCMA).",
    long_description="Transmitter, receiver, channel, closed-form BER analysis and CDMA/FDMA baselines for the CPOCMA modem, with a command-line experiment harness.",
    python_requires='>=3.7',
    install_requires=['numpy>=1.17', 'scipy>=1.4'],
    extras_require={'json': ['simplejson']},
    entry_points={
        'console_scripts': ['cpocma = cpocma.cli:main'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
        'Topic :: Communications',
    ]
)
