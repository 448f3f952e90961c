# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import pandas as pd
import qiime2

from .plugin_setup import plugin
from ._core import RunRecord
from ._format import MetricsReportFmt, RunRecordFmt
from ._metrics import MetricsReport
from ._serialization import read_record, read_report, write_record, \
    write_report


def _report_to_df(ff):
    with ff.open() as fh:
        report = read_report(fh)
    df = report.summary.set_index('criterion')
    df.index.name = 'id'
    return df


@plugin.register_transformer
def _1(data: RunRecord) -> RunRecordFmt:
    ff = RunRecordFmt()
    with ff.open() as fh:
        write_record(data, fh)
    return ff


@plugin.register_transformer
def _2(ff: RunRecordFmt) -> RunRecord:
    with ff.open() as fh:
        return read_record(fh)


@plugin.register_transformer
def _3(data: MetricsReport) -> MetricsReportFmt:
    ff = MetricsReportFmt()
    with ff.open() as fh:
        write_report(data, fh)
    return ff


@plugin.register_transformer
def _4(ff: MetricsReportFmt) -> MetricsReport:
    with ff.open() as fh:
        return read_report(fh)


@plugin.register_transformer
def _5(ff: MetricsReportFmt) -> pd.DataFrame:
    return _report_to_df(ff)


@plugin.register_transformer
def _6(ff: MetricsReportFmt) -> qiime2.Metadata:
    return qiime2.Metadata(_report_to_df(ff))
