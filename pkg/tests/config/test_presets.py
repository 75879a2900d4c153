import numpy as np
import pytest

from config.presets import PRESETS, get_preset


class TestPresets:
    """Tests for the presets module."""

    def test_get_preset_valid(self):
        """Test retrieval of a valid preset."""
        result = get_preset("schur_scalar")

        np.testing.assert_array_equal(result, [[4.0, 2.0], [2.0, 2.0]])

    def test_get_preset_invalid(self):
        """Test retrieval of an invalid preset raises ValueError."""
        with pytest.raises(ValueError) as excinfo:
            get_preset("invalid_preset")

        assert "not found" in str(excinfo.value)
        assert "Available presets:" in str(excinfo.value)
        assert "inverse_limit" in str(excinfo.value)

    def test_presets_return_fresh_copies(self):
        """Mutating a returned preset leaves the registry untouched."""
        first = get_preset("identity_4")
        first[0, 0] = 42.0

        assert get_preset("identity_4")[0, 0] == 1.0

    def test_presets_dictionary_structure(self):
        """Every preset builds a finite 2-D array of even size."""
        for name in PRESETS:
            m = get_preset(name)
            assert m.ndim == 2
            assert np.all(np.isfinite(m))
            assert m.shape[0] % 2 == 0 and m.shape[1] % 2 == 0

    def test_inverse_members(self):
        """Scalar members have C = 1 + 1/n and D = 1/n."""
        m = get_preset("inverse_member_4")
        np.testing.assert_allclose(m, [[1.0, 1.0], [1.25, 0.25]])
