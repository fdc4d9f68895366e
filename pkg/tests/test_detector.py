import warnings

import pytest

from ghostkeys.attack import enumerate_guesses
from ghostkeys.bloom import bf_params
from ghostkeys.detector import (
    DEFAULT_FILTER_PARAMS,
    DetectorError,
    DetectorStore,
    DuplicateUserError,
    StoreCorruptionError,
    generate_honeywords,
    scoped_key,
)
from ghostkeys.generator import GeneratorConfig, GhostResult, generate


SMALL_FILTER = bf_params(10_000, 1e-6)


def _store(small_model, tmp_dir=None, **kwargs):
    kwargs.setdefault("filter_params", SMALL_FILTER)
    kwargs.setdefault("iterations", 200)  # keep PBKDF2 cheap in tests
    kwargs.setdefault(
        "oracle", lambda obs, k: enumerate_guesses(obs, small_model, k)
    )
    return DetectorStore(tmp_dir, **kwargs)


def _ghost_for(bundle, password, seed=0, **config_kw):
    model, cal, layout = bundle
    config = GeneratorConfig(rng_seed=seed, **config_kw)
    return generate(config, password, model, cal, layout)


# -- registration -------------------------------------------------------------


def test_register_and_successful_login(small_model):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    assert store.has_user("amy")
    assert store.check_login_attempt("amy", "correcthorse").verdict == "success"
    store.close()


def test_duplicate_registration_rejected(small_model):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    with pytest.raises(DuplicateUserError):
        store.register("amy", "otherpassword")


def test_register_validates_inputs(small_model):
    store = _store(small_model)
    with pytest.raises(DetectorError):
        store.register("", "correcthorse")
    with pytest.raises(Exception):
        store.register("amy", "no")  # invalid password


def test_passwords_are_stored_salted_and_hashed(small_model, tmp_path):
    store = _store(small_model, str(tmp_path))
    store.register("amy", "correcthorse")
    store.close()
    raw = (tmp_path / "credentials.log").read_text(encoding="utf-8")
    assert "correcthorse" not in raw


# -- login classification ---------------------------------------------------------


def test_wrong_password_fails_benign(small_model):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    outcome = store.check_login_attempt("amy", "wronghorse1")
    assert outcome.verdict == "fail_benign"
    assert store.alarms() == []


def test_unknown_user_fails_benign(small_model):
    store = _store(small_model)
    outcome = store.check_login_attempt("ghost-user", "whatever12")
    assert outcome.verdict == "fail_benign"


def test_observed_ghost_replay_raises_alarm(small_model, bundle):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    result = _ghost_for(bundle, "correcthorse", seed=3)
    # one legitimate login carrying the session's ghost record
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        outcome = store.check_login_attempt("amy", "correcthorse", result)
    assert outcome.verdict == "success"
    # the attacker read the screen/keystrokes and replays what they saw
    replay = store.check_login_attempt("amy", result.ghost)
    assert replay.verdict == "fail_alarm"
    assert replay.reason == "inference-attack-detected"
    assert [user for _ts, user in store.alarms()] == ["amy"]


def test_oracle_guesses_become_honeywords(small_model, bundle):
    store = _store(small_model)
    store.register("amy", "hunter2pass")
    result = _ghost_for(bundle, "hunter2pass", seed=4, r=0.3, p_min=0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        store.check_login_attempt("amy", "hunter2pass", result)
    if len(result.ghost) <= 24:
        guesses = enumerate_guesses(result.ghost, small_model, 21)
        decoys = [g for g in guesses if g not in ("hunter2pass", result.ghost)]
        hits = [
            d for d in decoys
            if store.check_login_attempt("amy", d).verdict == "fail_alarm"
        ]
        assert hits  # at least the top decoys alarm


def test_legitimate_user_is_never_alarmed(small_model, bundle):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(5):
            result = _ghost_for(bundle, "correcthorse", seed=seed)
            outcome = store.check_login_attempt("amy", "correcthorse", result)
            assert outcome.verdict == "success"
    assert store.alarms() == []


def test_honeywords_never_contain_the_real_password(small_model):
    # even if the oracle maliciously suggests it
    with pytest.warns(UserWarning):  # oracle gave nothing usable
        honeywords = generate_honeywords(
            "pXassword", "password", lambda obs, k: ["password"] * k, count=5
        )
    assert "password" not in honeywords
    assert honeywords[0] == "pXassword"


def test_honeyword_count_validation():
    with pytest.raises(DetectorError):
        generate_honeywords("gg", "g", lambda obs, k: [], count=0)


def test_honeyword_shortfall_warns():
    with pytest.warns(UserWarning, match="honeywords available"):
        got = generate_honeywords("pXass", "pass", lambda obs, k: [], count=20)
    assert got == ["pXass"]


def test_mismatched_ghost_record_is_ignored(small_model, bundle):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    # a ghost record whose extraction is NOT amy's password
    bogus = _ghost_for(bundle, "otherpassword", seed=6)
    inserted = store.record_successful_login("amy", bogus)
    assert inserted == 0
    assert store.check_login_attempt("amy", bogus.ghost).verdict == "fail_benign"


def test_corrupt_ghost_record_rejected(small_model):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    broken = GhostResult("correcthorse", "correcthorse", (True,) * 12)
    with pytest.raises(Exception):
        store.record_successful_login("amy", broken)


def test_scoped_keys_isolate_users(small_model, bundle):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    store.register("bob", "correcthorse")
    result = _ghost_for(bundle, "correcthorse", seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        store.check_login_attempt("amy", "correcthorse", result)
    # amy's honeyword must not alarm bob's account
    assert store.check_login_attempt("bob", result.ghost).verdict == "fail_benign"
    assert scoped_key("amy", "w") != scoped_key("bob", "w")
    # the NUL separator stays unambiguous because registration rejects ids
    # containing control characters and words come from the password alphabet
    with pytest.raises(DetectorError):
        store.register("a\x00b", "correcthorse")
    with pytest.raises(DetectorError):
        store.register("spaced name", "correcthorse")


# -- persistence --------------------------------------------------------------------


def test_store_round_trips_across_restart(small_model, bundle, tmp_path):
    store = _store(small_model, str(tmp_path))
    store.register("amy", "correcthorse")
    result = _ghost_for(bundle, "correcthorse", seed=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        store.check_login_attempt("amy", "correcthorse", result)
    store.check_login_attempt("amy", result.ghost)  # alarm #1
    store.close()

    reopened = _store(small_model, str(tmp_path))
    assert reopened.has_user("amy")
    assert reopened.check_login_attempt("amy", "correcthorse").verdict == "success"
    # filter contents survived: the same replay still alarms
    assert reopened.check_login_attempt("amy", result.ghost).verdict == "fail_alarm"
    assert len(reopened.alarms()) == 2
    reopened.close()


def test_corrupted_credentials_raise(small_model, tmp_path):
    (tmp_path / "credentials.log").write_text("garbage line\n", encoding="utf-8")
    with pytest.raises(StoreCorruptionError):
        _store(small_model, str(tmp_path))


def test_corrupted_filter_raises(small_model, tmp_path):
    store = _store(small_model, str(tmp_path))
    store.register("amy", "correcthorse")
    store.close()
    (tmp_path / "filter.vrbf").write_bytes(b"not a filter")
    with pytest.raises(StoreCorruptionError):
        _store(small_model, str(tmp_path))


def test_rebuild_filter_resets_coverage(small_model, bundle):
    store = _store(small_model)
    store.register("amy", "correcthorse")
    result = _ghost_for(bundle, "correcthorse", seed=9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        store.check_login_attempt("amy", "correcthorse", result)
    assert store.check_login_attempt("amy", result.ghost).verdict == "fail_alarm"
    store.rebuild_filter(bf_params(1000, 1e-4))
    # honeywords are unrecoverable by design: coverage resets...
    assert store.check_login_attempt("amy", result.ghost).verdict == "fail_benign"
    # ...and refills on the next legitimate login
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        store.check_login_attempt("amy", "correcthorse", result)
    assert store.check_login_attempt("amy", result.ghost).verdict == "fail_alarm"


def test_default_filter_params_match_design_point(small_model):
    assert DEFAULT_FILTER_PARAMS == dict(expected_n=1_000_000, target_fpr=1e-30)
