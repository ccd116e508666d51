import pytest

from prostate_bcr.errors import InvalidConfig
from prostate_bcr.models import RelapseMechanism, SynthConfig, TreatmentKind
from prostate_bcr.services import generate_cohort, mask_treatments


def curative_count(cohort) -> int:
    return sum(1 for t in cohort for it in t.treatments if it.kind.is_curative())


def test_generation_is_deterministic():
    cfg = SynthConfig(n_patients=10, seed=42, noise_sd=0.15, p_mask=0.3)
    assert generate_cohort(cfg) == generate_cohort(cfg)
    other = generate_cohort(SynthConfig(n_patients=10, seed=43, noise_sd=0.15, p_mask=0.3))
    assert other != generate_cohort(cfg)


def test_patients_do_not_depend_on_cohort_size():
    small, small_truth = generate_cohort(SynthConfig(n_patients=5, seed=9))
    large, large_truth = generate_cohort(SynthConfig(n_patients=12, seed=9))
    assert large[:5] == small
    assert large_truth.records[:5] == small_truth.records


def test_no_recurrence():
    _, truth = generate_cohort(SynthConfig(n_patients=50, seed=1, p_recurrence=0.0))
    assert truth.relapse_count() == 0
    assert all(it.mechanism == RelapseMechanism.Nothing for it in truth.records)


def test_trajectory_shapes_at_zero_noise():
    cohort, truth = generate_cohort(SynthConfig(n_patients=100, seed=7, noise_sd=0.0))
    records = truth.by_patient()
    kinds = {it.treatment_kind for it in truth.records}
    assert kinds == {TreatmentKind.RP, TreatmentKind.RT}
    for t in cohort:
        record = records[t.patient_id]
        post = [m.value for m in t.psa if m.date > record.treatment_date]
        pre = [m.value for m in t.psa if m.date < record.treatment_date]
        assert pre and post
        assert pre == sorted(pre)
        if record.treatment_kind == TreatmentKind.RP:
            assert post[0] < 0.1
            if record.mechanism != RelapseMechanism.Psa:
                assert max(post) < 0.1
        else:
            assert min(post) >= 0.2


def test_truth_matches_recorded_treatment():
    cohort, truth = generate_cohort(SynthConfig(n_patients=200, seed=3, p_recurrence=0.5))
    for t, record in zip(cohort, truth.records):
        assert t.patient_id == record.patient_id
        first = next(it for it in t.treatments if it.kind.is_curative())
        assert (first.date, first.kind) == (record.treatment_date, record.treatment_kind)
        if record.mechanism == RelapseMechanism.Secondary:
            assert record.relapse_date in {it.date for it in t.treatments}
        if record.relapse_date is not None:
            assert record.relapse_date > record.treatment_date


def test_secondary_relapses_present():
    _, truth = generate_cohort(SynthConfig(n_patients=200, seed=4, p_recurrence=1.0, p_secondary=1.0))
    assert all(it.mechanism == RelapseMechanism.Secondary for it in truth.records)


def test_invalid_config():
    with pytest.raises(InvalidConfig):
        SynthConfig(p_rp=1.5)
    with pytest.raises(InvalidConfig):
        SynthConfig(n_patients=0)
    with pytest.raises(InvalidConfig):
        SynthConfig(noise_sd=-0.1)
    with pytest.raises(InvalidConfig):
        SynthConfig(seed=-1)
    with pytest.raises(InvalidConfig):
        SynthConfig(sampling_interval_days=7)


def test_full_masking():
    cohort, truth = generate_cohort(SynthConfig(n_patients=50, seed=2))
    masked, masked_truth = mask_treatments(cohort, truth, 1.0, seed=2)
    assert curative_count(masked) == 0
    assert all(it.masked for it in masked_truth.records)
    for before, after, record, masked_record in zip(cohort, masked, truth.records, masked_truth.records):
        assert after.psa == before.psa
        assert masked_record.model_copy(update={"masked": False}) == record


def test_no_masking():
    cohort, truth = generate_cohort(SynthConfig(n_patients=50, seed=2))
    assert mask_treatments(cohort, truth, 0.0, seed=2) == (cohort, truth)


def test_masked_fraction():
    cohort, truth = generate_cohort(SynthConfig(n_patients=1000, seed=1))
    masked, _ = mask_treatments(cohort, truth, 0.5, seed=1)
    removed = 1 - curative_count(masked) / curative_count(cohort)
    assert 0.45 <= removed <= 0.55
