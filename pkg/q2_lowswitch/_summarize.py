# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import importlib.resources
import os

import q2templates

from ._metrics import MetricsReport

TEMPLATES = str(importlib.resources.files('q2_lowswitch') / 'assets')


def summarize(output_dir: str, metrics: MetricsReport,
              show_sweep: bool = True) -> None:
    summary = metrics.summary.copy()
    summary.to_csv(os.path.join(output_dir, 'summary.csv'), index=False)
    metrics.pairwise.to_csv(os.path.join(output_dir, 'pairwise.csv'),
                            index=False)

    sweep_html = None
    if show_sweep and not metrics.sweep.empty:
        sweep = metrics.sweep.pivot(index='sigma', columns='criterion',
                                    values='rsi').reset_index()
        sweep_html = q2templates.df_to_html(sweep, index=False)

    context = {
        'baseline': metrics.baseline,
        'sigma': metrics.sigma,
        'summary_html': q2templates.df_to_html(summary, index=False),
        'pairwise_html': q2templates.df_to_html(metrics.pairwise,
                                                index=False),
        'sweep_html': sweep_html,
    }
    index = os.path.join(TEMPLATES, 'index.html')
    q2templates.render(index, output_dir, context=context)
