import numpy as np
import pytest

from veplab import (
    ChannelLayout,
    MarkerStream,
    Recording,
    derive_virtual_channel,
    extract_epochs,
    load_markers,
    load_recording,
    save_markers,
    save_recording,
)
from veplab.errors import InputError, ParseError


def make_recording(rng, n_ch=3, n=40, fs=500.0):
    names = tuple(f"ch{i}" for i in range(n_ch))
    return Recording(
        sample_rate_hz=fs,
        layout=ChannelLayout(names),
        samples=rng.normal(size=(n_ch, n)) * 10,
        t0=0.0,
    )


def test_layout_rejects_duplicates_and_empty():
    with pytest.raises(InputError):
        ChannelLayout(("a", "a"))
    with pytest.raises(InputError):
        ChannelLayout(())


def test_recording_invariants():
    layout = ChannelLayout(("a", "b"))
    with pytest.raises(InputError):
        Recording(0.0, layout, np.zeros((2, 4)))
    with pytest.raises(InputError):
        Recording(500.0, layout, np.zeros((3, 4)))
    with pytest.raises(InputError):
        Recording(500.0, layout, np.array([[1.0, np.nan], [0.0, 0.0]]))


def test_load_small_csv(tmp_path):
    p = tmp_path / "rec.csv"
    p.write_text(
        "time_s,Pz,Oz\n0.0,1.0,3.0\n0.002,2.0,4.0\n0.004,1.5,3.5\n0.006,0.5,2.5\n"
    )
    rec = load_recording(p)
    assert rec.layout.names == ("Pz", "Oz")
    assert rec.samples.shape == (2, 4)
    assert rec.sample_rate_hz == 500.0
    assert rec.t0 == 0.0
    np.testing.assert_array_equal(rec.channel("Pz"), [1.0, 2.0, 1.5, 0.5])


def test_load_rejects_nan_cell_naming_row(tmp_path):
    p = tmp_path / "rec.csv"
    p.write_text("time_s,a\n0.0,1.0\n0.002,nan\n0.004,2.0\n")
    with pytest.raises(ParseError, match="row 3"):
        load_recording(p)


def test_load_rejects_ragged_row(tmp_path):
    p = tmp_path / "rec.csv"
    p.write_text("time_s,a,b\n0.0,1.0,2.0\n0.002,1.0\n")
    with pytest.raises(ParseError, match="row 3"):
        load_recording(p)


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "rec.csv"
    p.write_text("t,a\n0.0,1.0\n")
    with pytest.raises(ParseError, match="header"):
        load_recording(p)


def test_roundtrip_bit_exact(tmp_path):
    # save -> load -> save must reproduce the file byte for byte
    rng = np.random.default_rng(42)
    for trial in range(5):
        rec = make_recording(rng, n_ch=rng.integers(1, 5), n=rng.integers(2, 60))
        p1 = tmp_path / f"a{trial}.csv"
        p2 = tmp_path / f"b{trial}.csv"
        save_recording(rec, p1)
        loaded = load_recording(p1)
        save_recording(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        np.testing.assert_array_equal(loaded.samples, rec.samples)
        assert loaded.sample_rate_hz == rec.sample_rate_hz


def test_markers_roundtrip_and_vocabulary(tmp_path):
    mk = MarkerStream(
        (
            (0.0, "baseline_start"),
            (10.0, "trial_onset:radial_motion:12.0"),
            (15.0, "trial_offset:radial_motion:12.0"),
        )
    )
    p = tmp_path / "mk.csv"
    save_markers(mk, p)
    loaded = load_markers(p)
    assert loaded.events == mk.events
    with pytest.raises(InputError):
        MarkerStream(((0.0, "not_a_label"),))
    with pytest.raises(InputError):
        MarkerStream(((1.0, "baseline_start"), (0.5, "baseline_start")))


def test_derive_virtual_channel_mean():
    rec = Recording(
        500.0,
        ChannelLayout(("Pz", "Oz")),
        np.array([[1.0, 2.0], [3.0, 4.0]]),
    )
    out = derive_virtual_channel(rec, "POz", ["Pz", "Oz"])
    np.testing.assert_array_equal(out.channel("POz"), [2.0, 3.0])
    assert out.layout.virtual_sources["POz"] == ("Pz", "Oz")
    # originals untouched
    np.testing.assert_array_equal(out.samples[:2], rec.samples)


def test_derive_single_source_is_copy():
    rec = Recording(500.0, ChannelLayout(("a",)), np.array([[1.0, -2.0, 3.0]]))
    out = derive_virtual_channel(rec, "b", ["a"])
    np.testing.assert_array_equal(out.channel("b"), out.channel("a"))


def test_derive_matches_per_sample_loop_oracle():
    rng = np.random.default_rng(7)
    rec = make_recording(rng, n_ch=4, n=50)
    sources = ["ch0", "ch2", "ch3"]
    out = derive_virtual_channel(rec, "v", sources)
    # brute-force oracle: average each sample in a python loop
    expected = [
        sum(rec.channel(s)[i] for s in sources) / len(sources)
        for i in range(rec.n_samples)
    ]
    np.testing.assert_allclose(out.channel("v"), expected, rtol=0, atol=1e-12)


def test_derive_errors():
    rec = Recording(500.0, ChannelLayout(("a",)), np.zeros((1, 4)))
    with pytest.raises(InputError):
        derive_virtual_channel(rec, "a", ["a"])  # duplicate name
    with pytest.raises(InputError):
        derive_virtual_channel(rec, "b", ["missing"])


def test_derive_idempotent_content():
    rng = np.random.default_rng(3)
    rec = make_recording(rng, n_ch=3)
    a = derive_virtual_channel(rec, "v1", ["ch0", "ch1"])
    b = derive_virtual_channel(a, "v2", ["ch0", "ch1"])
    np.testing.assert_array_equal(b.channel("v1"), b.channel("v2"))


def test_extract_epochs_counts_and_snapping():
    fs = 500.0
    n = round(320 * fs)
    rec = Recording(
        fs, ChannelLayout(("a",)), np.arange(n, dtype=float)[None, :]
    )
    events = [(0.0, "baseline_start")]
    for k in range(30):
        t = 10.0 + 10.0 * k
        events.append((t, f"trial_onset:radial_motion:8.0"))
        events.append((t + 5.0, f"trial_offset:radial_motion:8.0"))
    mk = MarkerStream(tuple(events))
    epochs = extract_epochs(rec, mk, (0.0, 5.0))
    assert len(epochs) == 30
    assert all(e.n_samples == 2500 for e in epochs)
    assert epochs[0].condition == "radial_motion"
    assert epochs[0].target_freq_hz == 8.0
    # sample snapping: epoch 0 starts at sample 5000
    assert epochs[0].samples[0, 0] == 5000.0


def test_extract_epochs_empty_and_bounds():
    rec = Recording(500.0, ChannelLayout(("a",)), np.zeros((1, 1000)))
    assert extract_epochs(rec, MarkerStream(()), (0.0, 1.0)) == []
    mk = MarkerStream(((1.0, "trial_onset:radial_motion:8.0"),))
    with pytest.raises(InputError, match="1.0"):
        extract_epochs(rec, mk, (0.0, 5.0))
