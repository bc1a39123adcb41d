from setuptools import setup, find_packages
from neuroaps import __version__

setup(name='neuroaps',
      version=__version__,
      description='Anatomical priority sampling and NeuroAPS-Net for 2D brain-slice point clouds',
      packages=find_packages(exclude=["tests", "tests.*", "fuzz"]),
      include_package_data=True,
      package_data={
        # If any package contains *.txt or *.rst files, include them:
      '': ['*.txt', '*.rst', '*.yaml'],
      'neuroaps': ['config/*.yaml', 'templates/*.j2']},

      python_requires='>=3.9',

      install_requires=[
          "voluptuous>=0.13.0,<0.14.0",
          'click>=8.1.0,<9.0.0',
          'shortuuid>=1.0.8,<2.0.0',
          'tabulate>=0.9.0,<1.0.0',
          'colorama>=0.4.6,<1.0.0',
          'psutil>=5.9.0,<8.0.0',
          'PyYAML>=6.0,<7.0',
          'Jinja2>=3.1.0,<4.0.0',
          'numpy>=2.1.0,<3.0.0',
          'pandas>=2.0.0,<3.0.0',
          'scipy>=1.13.0,<2.0.0',
          'setuptools>=70.0.0'],

      extras_require={
          'test': ['pytest>=8.0.0'],
          'fuzz': ['atheris>=2.3.0'],
      },

      entry_points = {
        "console_scripts": [
            "neuroaps=neuroaps.cli:main",
        ]
    }
)
