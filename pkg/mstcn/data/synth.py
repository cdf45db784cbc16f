"""
Synthetic multi-modal datasets with planted, recoverable label signatures.

Label c leaves three kinds of traces: an integer-cycle sinusoid in IMU
channel c % 3, an offset of MFCC band c % 13 modulated by a cosine with
c // 13 cycles, and phone-state bit c when c < ps_width. With integer cycle
counts over the full window the signatures are mutually orthogonal, so a
matched filter separates the classes perfectly when there is no noise.
"""

import numpy as np
from collections import namedtuple, OrderedDict
from .preprocess import Instance, IMU_LENGTH, IMU_CHANNELS, MFCC_LENGTH, \
    MFCC_CHANNELS
from .dataset import save_dataset
from ..utils.random import check_state

__all__ = ['SynthSpec', 'SynthReport', 'LAYOUTS', 'synth_instances',
           'synth_generate', 'label_frequency', 'planted_modality',
           'matched_filter_scores']


LAYOUTS = ('redundant', 'complementary')
_PLANT_ORDER = ('acc', 'gyro', 'aud', 'ps')


SynthReport = namedtuple('SynthReport', ['path', 'n_instances', 'n_missing',
                                         'positive_rates'])


class SynthSpec:
    """
    Parameters of a synthetic dataset.

    Parameters
    ----------
    n_users : int, optional
    n_instances : int, optional
    n_labels : int, optional
    missing_rate : float, optional
        Probability that a label entry is missing, i.i.d.
    positive_rate : float or sequence of float, optional
        Positive probability, one value for all labels or one per label.
    seed : int, optional
    noise : float, optional
        Standard deviation of the Gaussian noise; also sets the phone-state
        bit flip probability to `0.1 * noise`.
    amplitude : float, optional
        Size of the planted signatures.
    ps_width : int or None, optional
        Set to `n_labels` if None.
    layout : str, optional
        `'redundant'` plants every label in every modality; `'complementary'`
        plants label c only in modality c % 4 (acc, gyro, aud, ps).
    vary_lengths : bool, optional
        Draw short and over-long IMU windows and MFCC sequences, some of them
        too short to keep.
    imu_length, mfcc_length : int, optional
        Nominal window sizes.
    """
    def __init__(self, n_users=10, n_instances=500, n_labels=8,
                 missing_rate=0.1, positive_rate=0.2, seed=0, noise=0.5,
                 amplitude=1.0, ps_width=None, layout='redundant',
                 vary_lengths=False, imu_length=IMU_LENGTH,
                 mfcc_length=MFCC_LENGTH):
        try:
            self.n_users = int(n_users)
            self.n_instances = int(n_instances)
            self.n_labels = int(n_labels)
            self.imu_length = int(imu_length)
            self.mfcc_length = int(mfcc_length)
            self.seed = int(seed)
            assert min(self.n_users, self.n_instances, self.n_labels,
                       self.imu_length, self.mfcc_length) >= 1
            assert self.seed >= 0
        except (TypeError, ValueError, AssertionError):
            raise ValueError('n_users, n_instances, n_labels, imu_length and '
                             'mfcc_length should be positive ints, and seed a '
                             'non-negative int.')
        self.missing_rate = float(missing_rate)
        if not 0. <= self.missing_rate <= 1.:
            raise ValueError('missing_rate should be in [0, 1], instead of '
                             '{}.'.format(missing_rate))
        rates = np.broadcast_to(np.asarray(positive_rate, dtype=np.float64),
                                (self.n_labels,)) if np.ndim(
                                    positive_rate) == 0 else np.asarray(
                                        positive_rate, dtype=np.float64)
        if rates.shape != (self.n_labels,) or np.any((rates < 0.) |
                                                     (rates > 1.)):
            raise ValueError('positive_rate should be one rate in [0, 1] or '
                             'one per label.')
        self.positive_rate = np.array(rates)
        self.noise = float(noise)
        self.amplitude = float(amplitude)
        if not self.noise >= 0. or not self.amplitude >= 0.:
            raise ValueError('noise and amplitude should be non-negative.')
        if self.noise * 0.1 > 1.:
            raise ValueError('noise should be at most 10, so that the '
                             'phone-state flip probability is valid.')
        self.ps_width = self.n_labels if ps_width is None else int(ps_width)
        if self.ps_width < 1:
            raise ValueError('ps_width should be a positive int.')
        if layout not in LAYOUTS:
            raise ValueError('layout should be one of {}, instead of '
                             '"{}".'.format(LAYOUTS, layout))
        self.layout = layout
        self.vary_lengths = bool(vary_lengths)
        if label_frequency(self.n_labels - 1) >= self.imu_length // 2:
            raise ValueError('imu_length {} is too short to plant {} distinct '
                             'frequencies.'.format(self.imu_length,
                                                   self.n_labels))

    def __repr__(self):
        return ('SynthSpec(n_users={}, n_instances={}, n_labels={}, '
                'missing_rate={}, seed={}, layout="{}")'.format(
                    self.n_users, self.n_instances, self.n_labels,
                    self.missing_rate, self.seed, self.layout))


def label_frequency(c):
    """Cycles per nominal IMU window of the sinusoid planted for label c."""
    return 4 + 4 * int(c)


def planted_modality(c, layout):
    return _PLANT_ORDER[c % 4] if layout == 'complementary' else None


def _carries(c, modality, layout):
    return layout == 'redundant' or _PLANT_ORDER[c % 4] == modality


def _mfcc_pattern(c, length):
    return np.cos(2. * np.pi * (c // MFCC_CHANNELS) * np.arange(length) /
                  length)


def synth_instances(spec):
    """
    Raw instances of a synthetic dataset, in a fixed draw order.

    Returns
    -------
    list of Instance
    """
    if not isinstance(spec, SynthSpec):
        raise ValueError('spec should be a SynthSpec.')
    rs = check_state(spec.seed)
    n, C = spec.n_instances, spec.n_labels
    truth = rs.random((n, C)) < spec.positive_rate
    missing = rs.random((n, C)) < spec.missing_rate
    codes = np.where(missing, -1, truth.astype(np.int64))
    phases = rs.uniform(0., 2. * np.pi, size=(n, C, 2))
    if spec.vary_lengths:
        imu_len = rs.integers(spec.imu_length // 2,
                              spec.imu_length + spec.imu_length // 8 + 1,
                              size=(n, 2))
        mfcc_len = rs.integers(10, spec.mfcc_length + 1, size=n)
    else:
        imu_len = np.full((n, 2), spec.imu_length)
        mfcc_len = np.full(n, spec.mfcc_length)
    flip = 0.1 * spec.noise
    t_imu = np.arange(spec.imu_length + spec.imu_length // 8)
    instances = []
    for i in range(n):
        windows = []
        for j, modality in enumerate(('acc', 'gyro')):
            length = imu_len[i, j]
            x = spec.noise * rs.standard_normal((length, IMU_CHANNELS))
            for c in np.flatnonzero(truth[i]):
                if _carries(c, modality, spec.layout):
                    x[:, c % IMU_CHANNELS] += spec.amplitude * np.sin(
                        2. * np.pi * label_frequency(c) * t_imu[:length] /
                        spec.imu_length + phases[i, c, j])
            windows.append(x.astype(np.float32))
        length = mfcc_len[i]
        mfcc = spec.noise * rs.standard_normal((length, MFCC_CHANNELS))
        for c in np.flatnonzero(truth[i]):
            if _carries(c, 'aud', spec.layout):
                mfcc[:, c % MFCC_CHANNELS] += spec.amplitude * _mfcc_pattern(
                    c, spec.mfcc_length)[np.arange(length) % spec.mfcc_length]
        ps = (rs.random(spec.ps_width) < 0.1).astype(np.uint8)
        for c in range(C):
            if _carries(c, 'ps', spec.layout) and c < spec.ps_width:
                ps[c] = truth[i, c]
        ps ^= (rs.random(spec.ps_width) < flip).astype(np.uint8)
        instances.append(Instance(
            'i{:06d}'.format(i), 'u{:03d}'.format(i % spec.n_users),
            windows[0], windows[1], mfcc.astype(np.float32), ps, codes[i]))
    return instances


def synth_generate(spec, path):
    """
    Write a synthetic dataset directory.

    Returns
    -------
    SynthReport
        With the observed positive rate of every label over present entries.
    """
    instances = synth_instances(spec)
    save_dataset(instances, path, spec.n_labels, spec.ps_width,
                 ['synthetic_{}'.format(c) for c in range(spec.n_labels)])
    codes = np.array([inst.labels for inst in instances])
    present = codes != -1
    with np.errstate(invalid='ignore', divide='ignore'):
        rates = np.sum(codes == 1, axis=0) / np.sum(present, axis=0)
    return SynthReport(path, len(instances), int(np.sum(~present)),
                       OrderedDict(('synthetic_{}'.format(c), float(r))
                                   for c, r in enumerate(rates)))


def matched_filter_scores(dataset, layout='redundant'):
    """
    Per-label detection scores from the planted signatures, an N x C array.

    The IMU score of label c is the magnitude of the rfft bin at its planted
    frequency; under the complementary layout each label is scored in the
    modality that carries it. Positives outscore negatives whenever the
    signal dominates the noise.
    """
    n_labels = dataset.n_labels
    scores = np.zeros((len(dataset), n_labels))
    spectra = {m: np.abs(np.fft.rfft(dataset.column(m).astype(np.float64),
                                     axis=1)) for m in ('acc', 'gyro')}
    mfcc = dataset.mfcc.astype(np.float64)
    for c in range(n_labels):
        modality = planted_modality(c, layout) or 'acc'
        if modality in ('acc', 'gyro'):
            scores[:, c] = spectra[modality][:, label_frequency(c),
                                             c % IMU_CHANNELS]
        elif modality == 'aud':
            pattern = _mfcc_pattern(c, mfcc.shape[1])
            scores[:, c] = mfcc[:, :, c % MFCC_CHANNELS] @ pattern
        else:
            if c >= dataset.ps_width:
                raise ValueError('label {} has no phone-state bit.'.format(c))
            scores[:, c] = dataset.ps[:, c]
    return scores
