# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import json

import numpy as np
import qiime2.plugin.model as model
from qiime2.plugin import ValidationError

from ._serialization import RECORD_KINDS


class RunRecordFmt(model.TextFileFormat):

    def _check_n_records(self, n):
        kinds = []
        switches = 0
        summary = None
        with open(str(self)) as fh:
            for i, line in enumerate(fh):
                if i == n:
                    break
                try:
                    entry = json.loads(line)
                except ValueError:
                    raise ValidationError(
                        'Line %d is not a JSON object.' % (i + 1))
                if not isinstance(entry, dict) or \
                        entry.get('kind') not in RECORD_KINDS:
                    raise ValidationError(
                        'Line %d has no recognised "kind". Should be one of: '
                        '%s.' % (i + 1, ', '.join(RECORD_KINDS)))
                kinds.append(entry['kind'])
                switches += entry['kind'] == 'switch'
                if entry['kind'] == 'summary':
                    summary = entry
        if not kinds or kinds[0] != 'config':
            raise ValidationError('The first line must be the run '
                                  'configuration.')
        if n == np.inf:
            if summary is None or kinds[-1] != 'summary':
                raise ValidationError('The last line must be the run '
                                      'summary.')
            if summary.get('switching_cost') != switches:
                raise ValidationError(
                    'The summary reports %r switches but %d switch lines '
                    'were found.' % (summary.get('switching_cost'),
                                     switches))

    def _validate_(self, level):
        record_count_map = {'min': 5, 'max': np.inf}
        self._check_n_records(record_count_map[level])


RunRecordDirFmt = model.SingleFileDirectoryFormat(
    'RunRecordDirFmt', 'run.jsonl', RunRecordFmt)


class MetricsReportFmt(model.TextFileFormat):

    def _validate_(self, level):
        with open(str(self)) as fh:
            try:
                data = json.load(fh)
            except ValueError:
                raise ValidationError('The metrics report is not valid JSON.')
        if not isinstance(data, dict):
            raise ValidationError('The metrics report must be a JSON object.')
        missing = {'baseline', 'sigma_rsi', 'summary'} - set(data)
        if missing:
            raise ValidationError('The metrics report is missing: %s.'
                                  % ', '.join(sorted(missing)))
        if not isinstance(data['summary'], list) or not data['summary']:
            raise ValidationError('The metrics report summary is empty.')


MetricsReportDirFmt = model.SingleFileDirectoryFormat(
    'MetricsReportDirFmt', 'metrics.json', MetricsReportFmt)
