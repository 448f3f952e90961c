# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from setuptools import setup, find_packages

import q2_lowswitch

setup(
    name="q2-lowswitch",
    version=q2_lowswitch.__version__,
    packages=find_packages(),
    author="q2-lowswitch development team",
    description="QIIME 2 plugin for deployment-efficient reinforcement "
                "learning.",
    license='BSD-3-Clause',
    url="https://github.com/q2-lowswitch/q2-lowswitch",
    install_requires=['numpy', 'pandas', 'pyyaml', 'scipy'],
    entry_points={
        "qiime2.plugins":
        ["q2-lowswitch=q2_lowswitch.plugin_setup:plugin"],
        "console_scripts":
        ["lowswitch=q2_lowswitch._cli:main"]
    },
    package_data={
        'q2_lowswitch': ['assets/*.html',
                         'citations.bib'],
        'q2_lowswitch.tests': ['data/*']},
    zip_safe=False,
    )
