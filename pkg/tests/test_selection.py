import math

import pytest
from hypothesis import given, strategies as st

from bsmreg import aic, bic, rank_models
from bsmreg.exceptions import DomainError

# mock jurors comparison (n = 104): label, k, loglik, AIC, AIC rank, BIC, BIC rank
TABLE3 = [
    ("B", 3, 28.5806, -51.1611, 8, -43.2280, 7),
    ("TPB", 5, 38.9206, -67.8411, 4, -54.6192, 4),
    ("GB", 4, 38.0714, -68.1428, 3, -57.5652, 3),
    ("IGB", 4, 38.4982, -68.9963, 1, -58.4188, 1),
    ("LNB", 4, 38.4423, -68.8846, 2, -58.3071, 2),
    ("BR", 4, 35.7298, -63.4596, 5, -52.8820, 5),
    ("GKW", 6, 29.8171, -47.6342, 10, -31.7678, 10),
    ("KW", 3, 28.8426, -51.6853, 7, -43.7521, 6),
    ("BKW", 5, 30.4264, -50.8527, 9, -37.6308, 9),
    ("LogitN", 3, 22.0126, -38.0252, 11, -30.0920, 11),
    ("GB1", 5, 32.1201, -54.2403, 6, -41.0183, 8),
]
FITS = [(label, ll, k) for label, k, ll, *_ in TABLE3]


class TestCriteria:
    def test_beta_row(self):
        assert aic(28.5806, 3) == pytest.approx(-51.1611, abs=5e-4)
        assert bic(28.5806, 3, 104) == pytest.approx(-43.2280, abs=5e-4)

    def test_igb_row(self):
        assert aic(38.4982, 4) == pytest.approx(-68.9963, abs=5e-4)
        assert bic(38.4982, 4, 104) == pytest.approx(-58.4188, abs=5e-4)

    def test_trivial(self):
        assert aic(0.0, 1) == 2.0
        assert bic(0.0, 1, 1) == 0.0

    @pytest.mark.xfail(strict=True, reason="published 2-dp value disagrees: ln(242)*4 - 2*195.65 = -369.344")
    def test_second_dataset_beta_row(self):
        assert bic(195.65, 4, 242) == pytest.approx(-369.40, abs=5e-2)

    def test_second_dataset_beta_row_value(self):
        assert bic(195.65, 4, 242) == pytest.approx(4 * math.log(242) - 391.3, abs=1e-12)

    @pytest.mark.parametrize("k, n", [(0, 10), (-1, 10), (2, 0)])
    def test_guards(self, k, n):
        with pytest.raises(DomainError):
            bic(1.0, k, n)
        if k < 1:
            with pytest.raises(DomainError):
                aic(1.0, k)

    @given(st.floats(-1e3, 1e3), st.floats(0.01, 10), st.integers(1, 20), st.integers(2, 10_000))
    def test_monotone(self, ll, d, k, n):
        assert aic(ll + d, k) < aic(ll, k)
        assert bic(ll + d, k, n) < bic(ll, k, n)
        assert aic(ll, k + 1) > aic(ll, k)
        assert bic(ll, k + 1, n) > bic(ll, k, n)
        assert bic(ll, k, n + 1) > bic(ll, k, n)


class TestRanking:
    def test_table3_ranks(self):
        table = rank_models(FITS, 104).by_label()
        for label, rank in [("IGB", 1), ("LNB", 2), ("GB", 3)]:
            assert table[label].aic_rank == rank
            assert table[label].bic_rank == rank

    @pytest.mark.parametrize("row", TABLE3, ids=lambda r: r[0])
    def test_table3_every_row(self, row):
        label, k, ll, a, a_rank, b, b_rank = row
        got = rank_models(FITS, 104).by_label()[label]
        assert got.aic == pytest.approx(a, abs=5e-4)
        assert got.bic == pytest.approx(b, abs=5e-4)
        assert (got.aic_rank, got.bic_rank) == (a_rank, b_rank)

    def test_ranks_are_permutation(self):
        table = rank_models(FITS, 104)
        assert sorted(r.aic_rank for r in table) == list(range(1, 12))
        assert sorted(r.bic_rank for r in table) == list(range(1, 12))
        rows = list(table)
        for a in rows:
            for b in rows:
                if a.aic < b.aic:
                    assert a.aic_rank < b.aic_rank

    def test_single(self):
        (row,) = rank_models([("B", 1.0, 3)], 50)
        assert row.aic_rank == row.bic_rank == 1 and not row.tie

    def test_tie(self):
        a, b = rank_models([("first", 10.0, 3), ("second", 10.0, 3)], 50)
        assert a.tie and b.tie
        assert (a.aic_rank, b.aic_rank) == (1, 2)

    def test_duplicates(self):
        with pytest.raises(DomainError, match="B"):
            rank_models([("B", 1.0, 3), ("B", 2.0, 3)], 50)

    def test_empty(self):
        with pytest.raises(DomainError):
            rank_models([], 10)

    @given(st.permutations(FITS))
    def test_permutation_invariant(self, perm):
        ref = {r.label: (r.aic_rank, r.bic_rank) for r in rank_models(FITS, 104)}
        got = {r.label: (r.aic_rank, r.bic_rank) for r in rank_models(perm, 104)}
        assert got == ref

    def test_records(self):
        rec = rank_models(FITS[:2], 104).to_records()
        assert rec[0]["label"] == "B" and set(rec[0]) >= {"aic", "bic", "aic_rank", "bic_rank", "k", "loglik"}
