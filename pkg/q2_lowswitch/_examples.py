# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------


def train_chain(use):
    run, = use.action(
        use.UsageAction('lowswitch', 'train'),
        use.UsageInputs(environment='chain10', agent='dqn_lite',
                        criterion='fix:n=100', total_steps=400,
                        warmup_steps=100, seed=0),
        use.UsageOutputNames(run='run')
    )

    run.assert_output_type('SwitchingRun')
