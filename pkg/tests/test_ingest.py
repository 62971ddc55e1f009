import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wienerbla import ingest, sequences as sq
from wienerbla.wiener import G3, IirLowpass, Nonlinearity, StaticNL, WienerModel, simulate, simulate_capture


def write(tmp_path, text, name="rec.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestReadRecord:
    def test_toy_file(self, tmp_path):
        p = write(tmp_path, "# fs=10\n# period_len=3\nt,input,output\n0,1,2\n0.1,3,4\n0.2,5,6\n")
        rec = ingest.read_record(p)
        np.testing.assert_array_equal(rec.input, [1, 3, 5])
        np.testing.assert_array_equal(rec.output, [2, 4, 6])
        assert rec.n_periods == 1 and rec.sample_rate_hz == 10.0

    def test_acquisition_rate(self, tmp_path):
        p = write(tmp_path, "# fs=200000\ninput,output\n1,1\n2,2\n")
        assert ingest.read_record(p).sample_rate_hz == 200_000.0

    def test_missing_output_column(self, tmp_path):
        p = write(tmp_path, "# fs=1\nt,input\n0,1\n")
        with pytest.raises(ValueError, match="columns"):
            ingest.read_record(p)

    def test_bad_cell_has_line_number(self, tmp_path):
        p = write(tmp_path, "# fs=1\ninput,output\n1,2\n1,x\n")
        with pytest.raises(ValueError, match=":4:"):
            ingest.read_record(p)

    def test_missing_rate(self, tmp_path):
        p = write(tmp_path, "input,output\n1,2\n")
        with pytest.raises(ValueError, match="sample rate"):
            ingest.read_record(p)

    def test_overrides(self, tmp_path):
        p = write(tmp_path, "# fs=1\ninput,output\n" + "1,1\n" * 6)
        rec = ingest.read_record(p, sample_rate_hz=5.0, period_len=2, discard_periods=1)
        assert rec.sample_rate_hz == 5.0 and rec.n_periods == 2

    def test_extra_meta_kept(self, tmp_path):
        p = write(tmp_path, "# fs=1\n# class=rcs\n# oversample=10\ninput,output\n1,1\n")
        assert ingest.read_record(p).meta == {"class": "rcs", "oversample": 10}

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            ingest.read_record(tmp_path / "x", format="wav")


class TestRoundTrip:
    def test_simulated_record(self, tmp_path):
        rec = simulate(WienerModel(fir=G3, nl=StaticNL("cubic")), sq.rcs(60, 1), n_periods=2)
        for with_time in (True, False):
            p = ingest.write_record(rec, tmp_path / f"r{with_time}.csv", with_time)
            back = ingest.read_record(p)
            np.testing.assert_array_equal(back.input, rec.input)
            np.testing.assert_array_equal(back.output, rec.output)
            assert (back.period_len, back.n_periods, back.sample_rate_hz) == (60, 2, rec.sample_rate_hz)

    @settings(max_examples=25, deadline=None)
    @given(arrays(float, st.integers(1, 30), elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_values_exact(self, tmp_path_factory, x):
        rec = ingest.WaveformRecord(x, -x, 123.5, x.size, 1)
        p = ingest.write_record(rec, tmp_path_factory.mktemp("h") / "r.csv")
        back = ingest.read_record(p)
        np.testing.assert_array_equal(back.input, x)
        np.testing.assert_array_equal(back.output, -x)

    def test_no_temp_files_left(self, tmp_path):
        rec = ingest.WaveformRecord(np.ones(4), np.ones(4), 1.0, 4, 1)
        ingest.write_record(rec, tmp_path / "a.csv")
        assert [p.name for p in tmp_path.iterdir()] == ["a.csv"]


class TestSegment:
    def test_discard(self):
        x = np.arange(12.0)
        u, y = ingest.segment(ingest.WaveformRecord(x, x, 1.0, 4, 2, 1))
        assert u.shape == (2, 4)
        np.testing.assert_array_equal(u[0], [4, 5, 6, 7])

    def test_fir_periods_identical(self):
        rec = simulate(WienerModel(fir=G3, nl=StaticNL("cubic")), sq.rcs(60, 2), n_periods=3)
        _, y = ingest.segment(rec)
        assert np.max(np.abs(y - y[0])) <= 1e-12

    def test_iir_settled_after_three(self):
        model = WienerModel(iir=IirLowpass(1600.0, 200_000.0), nl=StaticNL(Nonlinearity.HARD_CLIP, 0.6))
        rec = simulate_capture(model, sq.normalize(sq.rcs(762, 0), 1.0), 10, n_periods=2, discard_periods=3)
        _, y = ingest.segment(rec)
        assert np.max(np.abs(y[1] - y[0])) < 1e-9

    def test_short_record_rejected(self):
        with pytest.raises(ValueError):
            ingest.WaveformRecord(np.ones(5), np.ones(5), 1.0, 4, 2)


class TestResampling:
    def test_hold(self):
        np.testing.assert_array_equal(ingest.hold_upsample([1, -1], 2), [1, 1, -1, -1])

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, st.integers(1, 50), elements=st.floats(-10, 10)), st.integers(1, 12))
    def test_round_trip(self, u, factor):
        np.testing.assert_array_equal(ingest.decimate(ingest.hold_upsample(u, factor), factor), u)

    def test_generator_to_acquisition_factor(self):
        assert 200_000 // 20_000 == 10
        assert ingest.hold_upsample(np.ones(762), 10).size == 7620

    @pytest.mark.parametrize("factor", [0, -1, 2.5, True])
    def test_bad_factor(self, factor):
        with pytest.raises(ValueError):
            ingest.hold_upsample([1.0], factor)

    def test_oversampled_mask(self):
        mask = np.array([False, True, False, True])
        np.testing.assert_array_equal(np.flatnonzero(ingest.oversampled_mask(mask, 3)), [1])


class TestSteppedSine:
    def test_flat(self, tmp_path):
        p = write(tmp_path, "freq_hz,mag_db,phase_deg\n0,0,0\n1000,0,0\n", "ref.csv")
        np.testing.assert_allclose(ingest.read_stepped_sine_frf(p)([0, 10, 999.5]), 1.0)

    def test_lowpass_at_cutoff(self, tmp_path):
        filt = IirLowpass(1600.0, 200_000.0)
        f = np.linspace(0, 10_000, 101)
        p = ingest.write_stepped_sine(tmp_path / "ref.csv", f, filt.frf(f))
        h = ingest.read_stepped_sine_frf(p)(1600.0)[()]
        assert 20 * np.log10(abs(h)) == pytest.approx(-3.0103, abs=1e-3)
        assert np.rad2deg(np.angle(h)) == pytest.approx(-45.0, abs=0.5)

    def test_unwrapped_phase_interpolation(self, tmp_path):
        p = write(tmp_path, "freq_hz,mag_db,phase_deg\n0,0,170\n10,0,-170\n", "ref.csv")
        h = ingest.read_stepped_sine_frf(p)(5.0)[()]
        assert abs(np.rad2deg(np.angle(h))) == pytest.approx(180.0)

    def test_no_extrapolation(self, tmp_path):
        p = write(tmp_path, "freq_hz,mag_db,phase_deg\n10,0,0\n20,0,0\n", "ref.csv")
        with pytest.raises(ValueError, match="outside"):
            ingest.read_stepped_sine_frf(p)(25.0)

    def test_unsorted(self, tmp_path):
        p = write(tmp_path, "freq_hz,mag_db,phase_deg\n10,0,0\n5,0,0\n", "ref.csv")
        with pytest.raises(ValueError, match="increasing"):
            ingest.read_stepped_sine_frf(p)
