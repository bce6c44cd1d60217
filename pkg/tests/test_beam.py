"""Beam propagation, induced lens, pinhole integration, field I/O."""

import math
from dataclasses import replace

import numpy as np
import pytest

from vaporlens import beam

PAPER_BEAM = beam.GaussianBeam()  # 780.2 nm, 1.2 mm waist
Z_PINHOLE = 2.5


def analytic_free_spot_mm(z=Z_PINHOLE):
    zr = PAPER_BEAM.rayleigh_range_m
    return 1.2 * math.sqrt(1.0 + (z / zr) ** 2)


@pytest.fixture(scope="module")
def probe_1024():
    return beam.gaussian_field(PAPER_BEAM, 1024, 15.0)


@pytest.fixture(scope="module")
def probe_512():
    return beam.gaussian_field(PAPER_BEAM, 512, 30.0)


class TestGaussianBeam:
    def test_rayleigh_range(self):
        assert PAPER_BEAM.rayleigh_range_m == pytest.approx(5.80, rel=5e-3)

    def test_sampled_power_normalized(self, probe_1024):
        assert probe_1024.power == pytest.approx(1.0, rel=1e-12)

    def test_grid_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            beam.ComplexField(np.zeros((100, 100), complex), 15.0, 780.2)


class TestThinLensFocalLength:
    def test_paper_value(self):
        lens = beam.InducedLens(1e-6, 1.2, 7.5)
        assert beam.thin_lens_focal_length(lens) == pytest.approx(4.8, rel=1e-12)

    def test_sign_flip(self):
        lens = beam.InducedLens(-1e-6, 1.2, 7.5)
        assert beam.thin_lens_focal_length(lens) == pytest.approx(-4.8, rel=1e-12)

    def test_zero_index_change_signals_infinity(self):
        assert beam.thin_lens_focal_length(beam.InducedLens(0.0, 1.2, 7.5)) == math.inf


class TestApplyMedium:
    def test_identity_bit_for_bit(self, probe_512):
        out = beam.apply_medium(probe_512, beam.InducedLens(0.0, 1.2, 7.5, 0.0))
        assert np.array_equal(out.amplitude, probe_512.amplitude)

    def test_pure_phase_conserves_power(self, probe_512):
        out = beam.apply_medium(probe_512, beam.InducedLens(2e-6, 1.2, 7.5, 0.0))
        assert abs(out.power - probe_512.power) / probe_512.power < 1e-12

    def test_on_axis_attenuation_exact(self, probe_512):
        alpha = 3.7
        out = beam.apply_medium(probe_512, beam.InducedLens(0.0, 1.2, 7.5, alpha))
        c = probe_512.n // 2
        ratio = abs(out.amplitude[c, c]) ** 2 / abs(probe_512.amplitude[c, c]) ** 2
        assert ratio == pytest.approx(math.exp(-alpha * 0.075), rel=1e-12)

    def test_unresolved_control_waist_rejected(self, probe_512):
        with pytest.raises(beam.GridResolutionError):
            beam.apply_medium(probe_512, beam.InducedLens(1e-6, 0.3, 7.5))


class TestPropagate:
    def test_zero_distance_identity(self, probe_512):
        out = beam.propagate(probe_512, 0.0)
        assert np.array_equal(out.amplitude, probe_512.amplitude)

    def test_free_space_spot(self, probe_1024):
        out = beam.propagate(probe_1024, Z_PINHOLE)
        w = beam.second_moment_radius(out)
        assert w == pytest.approx(analytic_free_spot_mm(), rel=0.01)

    def test_power_conserved(self, probe_1024):
        out = beam.propagate(probe_1024, Z_PINHOLE)
        assert abs(out.power - probe_1024.power) / probe_1024.power < 1e-10

    def test_lensed_gaussian_matches_abcd(self, probe_1024):
        # ideal quadratic lens phase: stays Gaussian, ABCD is exact
        f = 4.8
        k0 = 2 * math.pi / (probe_1024.wavelength_nm * 1e-9)
        x = probe_1024.coords_m()
        r2 = x[:, None] ** 2 + x[None, :] ** 2
        lensed = replace(probe_1024,
                         amplitude=probe_1024.amplitude * np.exp(-1j * k0 * r2 / (2 * f)))
        w = beam.second_moment_radius(beam.propagate(lensed, Z_PINHOLE))
        assert w == pytest.approx(beam.abcd_spot_size(PAPER_BEAM, f, Z_PINHOLE),
                                  rel=0.01)

    def test_sampling_guard(self, probe_1024):
        with pytest.raises(beam.AliasingError, match="pitch"):
            beam.propagate(probe_1024, 0.05)

    def test_rejects_negative_distance(self, probe_512):
        with pytest.raises(ValueError):
            beam.propagate(probe_512, -1.0)


class TestAbcdSpotSize:
    def test_no_lens(self):
        w = beam.abcd_spot_size(PAPER_BEAM, math.inf, Z_PINHOLE)
        assert w == pytest.approx(analytic_free_spot_mm(), rel=1e-12)

    def test_focusing_shrinks_spot(self):
        assert beam.abcd_spot_size(PAPER_BEAM, 4.8, Z_PINHOLE) < analytic_free_spot_mm()

    def test_defocusing_grows_spot(self):
        assert beam.abcd_spot_size(PAPER_BEAM, -4.8, Z_PINHOLE) > analytic_free_spot_mm()

    def test_zero_focal_length_rejected(self):
        with pytest.raises(ValueError):
            beam.abcd_spot_size(PAPER_BEAM, 0.0, Z_PINHOLE)


class TestPinholeTransmission:
    def test_free_space_baseline(self, probe_1024):
        out = beam.propagate(probe_1024, Z_PINHOLE)
        t = beam.pinhole_transmission(out, 75.0)
        w = analytic_free_spot_mm() * 1e-3
        expected = 1.0 - math.exp(-2 * (75e-6) ** 2 / w**2)
        assert t == pytest.approx(expected, rel=0.02)

    def test_wide_aperture_captures_everything(self, probe_1024):
        t = beam.pinhole_transmission(probe_1024, 1024 * 15.0 / 2)
        assert t >= 0.999

    def test_uniform_field_disk_fraction(self):
        n, pitch = 512, 30.0
        field = beam.ComplexField(np.ones((n, n), complex), pitch, 780.2)
        t = beam.pinhole_transmission(field, n * pitch / 2)
        assert t == pytest.approx(math.pi / 4, rel=2e-3)

    def test_unresolved_pinhole_rejected(self, probe_512):
        with pytest.raises(beam.PinholeUnresolvedError):
            beam.pinhole_transmission(probe_512, 50.0)


class TestInducedLensPipeline:
    def test_transmission_monotone_in_index_change(self, probe_1024):
        values = []
        for dn in np.linspace(-3e-6, 3e-6, 13):
            lens = beam.InducedLens(float(dn), 1.2, 7.5, 0.0)
            out = beam.propagate(beam.apply_medium(probe_1024, lens), Z_PINHOLE)
            values.append(beam.pinhole_transmission(out, 75.0))
        assert np.all(np.diff(values) > 0)

    def test_spot_sizes_bracket_free_space(self, probe_1024):
        spots = {}
        for dn in (-1e-6, 1e-6):
            lens = beam.InducedLens(dn, 1.2, 7.5, 0.0)
            out = beam.propagate(beam.apply_medium(probe_1024, lens), Z_PINHOLE)
            spots[dn] = beam.second_moment_radius(out)
        free = analytic_free_spot_mm()
        assert spots[1e-6] < free < spots[-1e-6]

    def test_weak_lens_agreement_and_breakdown(self, probe_1024):
        """The thin-lens/ABCD description of the Gaussian-profile mask holds
        only for very weak lenses: with probe and control waists equal, the
        second-moment spot follows ABCD to 5% up to |dn0| ~ 1e-7 and then
        departs rapidly (the mask's effective moment-level focal length is
        4x the paraxial one).  This pins the measured breakdown point."""
        ratios = {}
        for dn in (1e-7, 3e-7, 1e-6, 3e-6):
            lens = beam.InducedLens(dn, 1.2, 7.5, 0.0)
            out = beam.propagate(beam.apply_medium(probe_1024, lens), Z_PINHOLE)
            w = beam.second_moment_radius(out)
            w_abcd = beam.abcd_spot_size(
                PAPER_BEAM, beam.thin_lens_focal_length(lens), Z_PINHOLE)
            ratios[dn] = w / w_abcd
        assert abs(ratios[1e-7] - 1.0) < 0.05
        assert abs(ratios[3e-7] - 1.0) > 0.05  # breakdown between 1e-7 and 3e-7
        # the departure keeps growing while the ABCD beam is still pre-focal
        assert abs(ratios[3e-7] - 1.0) < abs(ratios[1e-6] - 1.0)
        assert all(abs(r - 1.0) > 0.05 for dn, r in ratios.items() if dn >= 3e-7)


class TestFieldIO:
    def test_binary_round_trip(self, tmp_path, probe_512):
        lens = beam.InducedLens(1e-6, 1.2, 7.5, 0.4)
        field = beam.apply_medium(probe_512, lens)
        path = tmp_path / "field.bin"
        beam.save_field(field, path)
        back = beam.load_field(path)
        assert back.n == field.n
        assert back.pitch_um == field.pitch_um
        assert back.wavelength_nm == field.wavelength_nm
        assert np.array_equal(back.amplitude, field.amplitude)

    def test_truncated_file_rejected(self, tmp_path, probe_512):
        path = tmp_path / "field.bin"
        beam.save_field(probe_512, path)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(ValueError):
            beam.load_field(path)

    def test_intensity_slice_csv(self, tmp_path, probe_512):
        path = tmp_path / "slice.csv"
        beam.save_intensity_slice_csv(probe_512, path)
        rows = np.genfromtxt(path, delimiter=",", names=True)
        assert rows.dtype.names == ("x_mm", "intensity")
        i0 = np.argmin(np.abs(rows["x_mm"]))
        assert rows["intensity"][i0] == np.max(rows["intensity"])
