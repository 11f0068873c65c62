"""
CSV artifacts and the one-line JSON summary.
"""

import json
import logging
import os
import sys

import numpy as np
import pandas as pd

logger = logging.getLogger('subwalk')

FLOAT_FORMAT = '%.17g'


def format_point(x):
    return ';'.join(str(int(c)) for c in np.atleast_1d(x))


def write_csv(frame, out, name):
    """Write ``frame`` to ``out/name``: header row, no index, 17 significant digits, LF endings."""
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug('wrote %d rows to %s', len(frame), path)
    return path


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    return value


def json_line(summary):
    return json.dumps(_plain(summary), sort_keys=True)


def emit(summary, stream=None):
    stream = sys.stdout if stream is None else stream
    stream.write(json_line(summary) + '\n')
    stream.flush()


def coeffs_frame(table):
    k = np.arange(1, table.K + 1)
    return pd.DataFrame({'k': k, 'c': table.c[1:]})


def pmf_frame(sub):
    k = np.arange(sub.n, sub.K + 1)
    return pd.DataFrame({'k': k, 'prob': sub.pmf[sub.n:]})


def tail_frame(rows):
    return pd.DataFrame(rows, columns=['t', 'empirical_tail', 'predictor', 'ratio'])


def kernel_frame(tables):
    """One row per (point, route) from a sequence of KernelTables."""
    frames = []
    for table in tables:
        frames.append(pd.DataFrame({
            'x': [format_point(p) for p in table.points],
            'n': table.n,
            'p_psi': table.values,
            'error_bound': table.error_bound,
            'route': table.route,
        }))
    if not frames:
        return pd.DataFrame(columns=['x', 'n', 'p_psi', 'error_bound', 'route'])
    return pd.concat(frames, ignore_index=True)


def simulate_frame(paths, t_grid):
    rows = []
    for replica, path in enumerate(paths):
        for t, x in zip(t_grid, path):
            rows.append({'replica': replica, 't': t, 'x': format_point(x)})
    return pd.DataFrame(rows, columns=['replica', 't', 'x'])
