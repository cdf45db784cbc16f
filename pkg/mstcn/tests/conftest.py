import pytest
import mstcn as mt
from mstcn.data import Dataset, SynthSpec, preprocess, synth_instances


TINY_IMU = 40
TINY_MFCC = 24


def tiny_config(**changes):
    d = dict(imu_length=TINY_IMU, aud_length=TINY_MFCC, imu_kernels=(4, 3),
             aud_kernels=(3, 2), filters=(4, 8), ps_units=8,
             shared_units=(16, 8), task_units=8, ps_task_units=8,
             fusion_fc_units=8, fusion_conv_kernel=3, fusion_conv_filters=8,
             label_count=4, ps_width=4)
    d.update(changes)
    return mt.ModelConfig(**d)


def tiny_dataset(n_users=4, n_instances=40, n_labels=4, seed=0, **kwargs):
    spec = SynthSpec(n_users=n_users, n_instances=n_instances,
                     n_labels=n_labels, seed=seed, imu_length=TINY_IMU,
                     mfcc_length=TINY_MFCC, **kwargs)
    kept = [preprocess(i, TINY_IMU, TINY_MFCC, ps_width=spec.ps_width)
            for i in synth_instances(spec)]
    return Dataset.from_instances(kept, n_labels, spec.ps_width)


@pytest.fixture
def config():
    return tiny_config()


@pytest.fixture
def dataset():
    return tiny_dataset()
