# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import os
import shutil

from qiime2.plugin import ValidationError
from qiime2.plugin.testing import TestPluginBase

from q2_lowswitch._format import (MetricsReportDirFmt, MetricsReportFmt,
                                  RunRecordDirFmt, RunRecordFmt)


class RunRecordFormatTests(TestPluginBase):
    package = 'q2_lowswitch.tests'

    def test_valid(self):
        fmt = RunRecordFmt(self.get_data_path('run-1.jsonl'), mode='r')

        fmt.validate(level='min')
        fmt.validate(level='max')

    def test_config_must_come_first(self):
        fmt = RunRecordFmt(self.get_data_path('run-invalid-1.jsonl'),
                           mode='r')

        with self.assertRaisesRegex(ValidationError, 'first line'):
            fmt.validate(level='min')

    def test_switch_count_mismatch(self):
        fmt = RunRecordFmt(self.get_data_path('run-invalid-2.jsonl'),
                           mode='r')

        fmt.validate(level='min')
        with self.assertRaisesRegex(ValidationError, '3 switches'):
            fmt.validate(level='max')

    def test_not_json(self):
        fmt = RunRecordFmt(self.get_data_path('run-invalid-3.jsonl'),
                           mode='r')

        with self.assertRaisesRegex(ValidationError, 'Line 2'):
            fmt.validate(level='min')

    def test_directory_format(self):
        shutil.copy(self.get_data_path('run-1.jsonl'),
                    os.path.join(self.temp_dir.name, 'run.jsonl'))

        RunRecordDirFmt(self.temp_dir.name, mode='r').validate()


class MetricsReportFormatTests(TestPluginBase):
    package = 'q2_lowswitch.tests'

    def test_valid(self):
        fmt = MetricsReportFmt(self.get_data_path('metrics-1.json'), mode='r')
        fmt.validate()

    def test_empty_summary(self):
        fmt = MetricsReportFmt(self.get_data_path('metrics-invalid-1.json'),
                               mode='r')

        with self.assertRaisesRegex(ValidationError, 'summary is empty'):
            fmt.validate()

    def test_not_json(self):
        fmt = MetricsReportFmt(self.get_data_path('run-1.jsonl'), mode='r')

        with self.assertRaisesRegex(ValidationError, 'not valid JSON'):
            fmt.validate()

    def test_directory_format(self):
        shutil.copy(self.get_data_path('metrics-1.json'),
                    os.path.join(self.temp_dir.name, 'metrics.json'))

        MetricsReportDirFmt(self.temp_dir.name, mode='r').validate()
