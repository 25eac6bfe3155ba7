import numpy as np
import pytest

from offlang.corpus import Task, read_tsv
from offlang.evaluation import (
    ConfusionMatrix,
    compare_runs,
    confusion,
    format_report,
    macro_f1,
    report,
)


def matrix(task, rows):
    return ConfusionMatrix(task=task, counts=np.array(rows, dtype=np.int64))


class TestConfusion:
    def test_perfect_is_diagonal(self):
        m = confusion(["OFF", "NOT", "OFF"], ["OFF", "NOT", "OFF"], Task.A)
        assert m.counts.tolist() == [[2, 0], [0, 1]]

    def test_counting(self):
        m = confusion(["OFF", "OFF", "NOT", "NOT"], ["OFF", "NOT", "OFF", "NOT"], Task.A)
        assert m.counts.tolist() == [[1, 1], [1, 1]]

    def test_empty(self):
        m = confusion([], [], Task.C)
        assert m.counts.tolist() == [[0] * 3] * 3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion(["OFF"], [], Task.A)

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="unknown label"):
            confusion(["OFF"], ["XYZ"], Task.A)

    def test_merge_equals_concatenation(self):
        g1, p1 = ["OFF", "NOT", "OFF"], ["NOT", "NOT", "OFF"]
        g2, p2 = ["NOT", "NOT"], ["OFF", "NOT"]
        merged = confusion(g1, p1, Task.A) + confusion(g2, p2, Task.A)
        assert merged.counts.tolist() == confusion(g1 + g2, p1 + p2, Task.A).counts.tolist()


class TestMacroF1:
    def test_perfect_diagonal_is_one(self):
        assert macro_f1(matrix(Task.A, [[3, 0], [0, 5]])) == 1.0

    def test_hand_computed_symmetric_case(self):
        # both classes: P = R = 2/3, so F1 = 2/3 and the mean is 2/3
        assert macro_f1(matrix(Task.A, [[2, 1], [1, 2]])) == pytest.approx(2 / 3, abs=1e-12)

    def test_degenerate_one_class_predictions(self):
        # all predicted OFF on balanced golds: F1(OFF) = 2*0.5*1/1.5 = 2/3, F1(NOT) = 0
        m = matrix(Task.A, [[2, 0], [2, 0]])
        assert macro_f1(m) == pytest.approx((2 / 3 + 0.0) / 2, abs=1e-12)

    def test_absent_class_excluded(self):
        # no OTH gold or predictions: average over IND and GRP only
        m = matrix(Task.C, [[4, 0, 0], [0, 3, 0], [0, 0, 0]])
        assert macro_f1(m) == 1.0

    def test_all_excluded_raises(self):
        with pytest.raises(ValueError, match="nothing to score"):
            macro_f1(matrix(Task.A, [[0, 0], [0, 0]]))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        counts = rng.integers(0, 9, size=(3, 3))
        base = macro_f1(matrix(Task.C, counts))
        perm = [2, 0, 1]
        permuted = counts[np.ix_(perm, perm)]
        assert macro_f1(matrix(Task.C, permuted)) == pytest.approx(base, abs=1e-12)

    def test_binary_range_and_diagonal_iff_one(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            counts = rng.integers(0, 6, size=(2, 2))
            if counts[0].sum() == 0 or counts[1].sum() == 0:
                continue
            score = macro_f1(matrix(Task.A, counts))
            assert 0.0 <= score <= 1.0
            off_diag = counts[0, 1] + counts[1, 0]
            assert (score == 1.0) == (off_diag == 0)


class TestReport:
    def test_macro_consistency(self):
        m = matrix(Task.A, [[5, 2], [1, 7]])
        rep = report(m)
        assert rep.macro_f1 == macro_f1(m)

    def test_supports_are_gold_row_sums(self):
        m = matrix(Task.C, [[3, 1, 0], [0, 2, 2], [1, 0, 1]])
        rep = report(m)
        assert [c.support for c in rep.per_class] == [4, 4, 2]

    def test_three_rows_for_task_c(self):
        rep = report(matrix(Task.C, np.eye(3, dtype=int) * 2))
        assert len(rep.per_class) == 3
        assert "macro-F1" in format_report(rep)


class TestCompareRuns:
    def _reports(self, n):
        rng = np.random.default_rng(5)
        out = []
        for i in range(n):
            counts = rng.integers(1, 9, size=(2, 2))
            out.append((f"seed{i}", report(matrix(Task.A, counts))))
        return out

    def test_five_rows_plus_average(self):
        table = compare_runs(self._reports(5), fmt="text")
        lines = table.splitlines()
        assert len(lines) == 7  # header + 5 runs + average
        assert lines[-1].startswith("Average")

    def test_single_run_average_is_itself(self):
        reports = self._reports(1)
        table = compare_runs(reports, fmt="text")
        lines = table.splitlines()
        assert lines[1].split()[1] == lines[2].split()[1]

    def test_tsv_round_trips_through_reader(self, tmp_path):
        table = compare_runs(self._reports(3), fmt="tsv")
        path = tmp_path / "table.tsv"
        path.write_text(table, encoding="utf-8")
        header, rows = read_tsv(path)
        assert header == ["run", "macro_f1", "f1_OFF", "f1_NOT"]
        assert len(rows) == 4
        assert rows[-1][0] == "Average"

    def test_four_decimals_half_even(self):
        reports = self._reports(2)
        table = compare_runs(reports, fmt="tsv")
        cell = table.splitlines()[1].split("\t")[1]
        assert len(cell.split(".")[1]) == 4

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compare_runs([], fmt="text")
