import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cash.data import (
    CATEGORICAL,
    NUMERIC,
    load_arff,
    load_csv,
    load_dataset,
    make_dataset,
    split_train_test,
    stratified_folds,
    write_csv,
)
from cash.errors import (
    ConfigError,
    EmptyFile,
    KTooLarge,
    MissingLabelColumn,
    MissingValue,
    ParseError,
    RaggedRow,
    UnsupportedAttributeType,
)


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return _write


class TestLoadCsv:
    def test_labels_first_appearance(self, write):
        p = write("d.csv", "x,y\n1,a\n2,b\n3,a\n4,b\n")
        ds = load_csv(p, "y")
        assert ds.n_classes == 2
        assert ds.labels.tolist() == [0, 1, 0, 1]
        assert ds.class_names == ("a", "b")

    def test_numeric_column_detected(self, write):
        ds = load_csv(write("d.csv", "x,y\n1.5,a\n2.5,b\n"), "y")
        assert [a.kind for a in ds.attributes] == [NUMERIC]
        assert ds.features[:, 0].tolist() == [1.5, 2.5]

    def test_categorical_levels_first_appearance(self, write):
        ds = load_csv(write("d.csv", "c,y\nred,a\nblue,b\nred,a\ngreen,b\n"), "y")
        assert ds.attributes[0].kind == CATEGORICAL
        assert ds.attributes[0].levels == ("red", "blue", "green")
        assert ds.features[:, 0].tolist() == [0, 1, 0, 2]

    def test_ragged_row_reports_line(self, write):
        with pytest.raises(RaggedRow) as err:
            load_csv(write("d.csv", "x,y\n1,a\n2,b,7\n3,a\n"), "y")
        assert err.value.row_index == 3

    def test_missing_label_column(self, write):
        with pytest.raises(MissingLabelColumn):
            load_csv(write("d.csv", "x,y\n1,a\n2,b\n"), "label")

    def test_empty_file(self, write):
        with pytest.raises(EmptyFile):
            load_csv(write("d.csv", ""), "y")

    def test_missing_value_token(self, write):
        with pytest.raises(MissingValue):
            load_csv(write("d.csv", "x,y\n1,a\n?,b\n"), "y")

    def test_label_by_index_without_header(self, write):
        ds = load_csv(write("d.csv", "p,1\nq,2\np,3\n"), label_column=0, has_header=False)
        assert ds.labels.tolist() == [0, 1, 0]
        assert ds.attributes[0].kind == NUMERIC

    def test_non_decimal_tokens_are_categorical(self, write):
        ds = load_csv(write("d.csv", "x,y\n1,a\nnan,b\n"), "y")
        assert ds.attributes[0].kind == CATEGORICAL


class TestLoadArff:
    HEADER = "@relation r\n@attribute v numeric\n@attribute c {x,y}\n@data\n"

    def test_declaration_order(self, write):
        ds = load_arff(write("d.arff", self.HEADER + "1,x\n2,y\n"))
        assert ds.n_instances == 2
        assert ds.labels.tolist() == [0, 1]
        assert ds.name == "r"

    def test_declaration_order_not_appearance(self, write):
        ds = load_arff(write("d.arff", self.HEADER + "1,y\n2,x\n"))
        assert ds.labels.tolist() == [1, 0]

    def test_string_attribute_rejected(self, write):
        with pytest.raises(UnsupportedAttributeType):
            load_arff(write("d.arff", "@relation r\n@attribute s string\n@attribute c {p,n}\n@data\na,p\n"))

    def test_class_attribute_mid_list(self, write):
        text = ("@relation r\n@attribute a numeric\n@attribute class {p,n}\n"
                "@attribute b {u,v}\n@data\n1,p,u\n2,n,v\n3,n,u\n")
        ds = load_arff(write("d.arff", text))
        assert ds.class_names == ("p", "n")
        assert ds.labels.tolist() == [0, 1, 1]
        assert [a.name for a in ds.attributes] == ["a", "b"]

    def test_parse_error_line(self, write):
        with pytest.raises(ParseError) as err:
            load_arff(write("d.arff", self.HEADER + "1,x\n2,z\n"))
        assert err.value.line == 6

    def test_comments_and_quotes(self, write):
        text = ("% comment\n@RELATION 'q r'\n@ATTRIBUTE 'my attr' REAL\n"
                "@ATTRIBUTE class {'a b',c}\n@DATA\n1.0,'a b'\n% mid\n2.0,c\n")
        ds = load_arff(write("d.arff", text))
        assert ds.class_names == ("a b", "c")
        assert ds.attributes[0].name == "my attr"

    def test_bundled_iris(self):
        from cash.datasets import load
        ds = load("iris")
        assert ds.n_instances == 150 and ds.n_classes == 3
        assert ds.class_counts().tolist() == [50, 50, 50]


def test_load_dataset_rejects_unknown_format(tmp_path):
    with pytest.raises(ConfigError):
        load_dataset(tmp_path / "x.xls")


def _fixture(counts, n_attr=2, seed=0):
    rng = np.random.default_rng(seed)
    y = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    return make_dataset(rng.normal(size=(len(y), n_attr)), y)


class TestSplitTrainTest:
    def test_ten_instances(self):
        tr, te = split_train_test(_fixture([5, 5]), 0.3, seed=4)
        assert (tr.n_instances, te.n_instances) == (7, 3)
        assert set(tr.labels.tolist()) == {0, 1}
        assert set(te.labels.tolist()) == {0, 1}

    def test_deterministic(self):
        ds = _fixture([5, 5])
        a = split_train_test(ds, 0.3, seed=11)
        b = split_train_test(ds, 0.3, seed=11)
        assert np.array_equal(a[1].features, b[1].features)
        assert np.array_equal(a[0].labels, b[0].labels)

    def test_seventy_thirty(self):
        tr, te = split_train_test(_fixture([60, 40]), 0.3, seed=0)
        assert (tr.n_instances, te.n_instances) == (70, 30)
        assert te.class_counts().tolist() == [18, 12]

    def test_test_set_is_read_only(self):
        _, te = split_train_test(_fixture([5, 5]), 0.3, seed=0)
        with pytest.raises(ValueError):
            te.features[0, 0] = 1.0

    def test_partition(self):
        ds = make_dataset(np.arange(40.0)[:, None], np.arange(40) % 3)
        tr, te = split_train_test(ds, 0.25, seed=2)
        got = sorted(tr.features[:, 0].tolist() + te.features[:, 0].tolist())
        assert got == list(range(40))

    def test_rare_class_on_both_sides(self):
        tr, te = split_train_test(_fixture([18, 2]), 0.3, seed=1)
        assert te.class_counts()[1] == 1 and tr.class_counts()[1] == 1


class TestStratifiedFolds:
    def test_equal_sizes(self):
        plan = stratified_folds(_fixture([5, 5]), 5, seed=0)
        assert plan.fold_sizes().tolist() == [2] * 5

    def test_sizes_differ_by_one(self):
        plan = stratified_folds(_fixture([6, 5]), 5, seed=0)
        assert sorted(plan.fold_sizes().tolist()) == [2, 2, 2, 2, 3]

    def test_stratification(self):
        ds = _fixture([6, 4])
        plan = stratified_folds(ds, 2, seed=3)
        for f in range(2):
            assert ds.labels[plan.valid_indices(f)].tolist().count(0) == 3
            assert ds.labels[plan.valid_indices(f)].tolist().count(1) == 2

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            stratified_folds(_fixture([2, 2]), 5, seed=0)

    def test_k_below_two(self):
        with pytest.raises(ConfigError):
            stratified_folds(_fixture([2, 2]), 1, seed=0)

    @settings(max_examples=60, deadline=None)
    @given(counts=st.lists(st.integers(1, 25), min_size=2, max_size=5),
           k=st.integers(2, 10), seed=st.integers(0, 2**31))
    def test_invariants(self, counts, k, seed):
        ds = _fixture(counts)
        if k > ds.n_instances:
            return
        plan = stratified_folds(ds, k, seed)
        sizes = plan.fold_sizes()
        assert sizes.max() - sizes.min() <= 1
        assert sizes.sum() == ds.n_instances
        for c in range(len(counts)):
            per = np.bincount(plan.fold_of[ds.labels == c], minlength=k)
            assert per.max() - per.min() <= 1
        # every instance sits on the training side of exactly k-1 folds
        cover = np.zeros(ds.n_instances, dtype=int)
        for f in range(k):
            cover[plan.train_indices(f)] += 1
        assert (cover == k - 1).all()
        assert np.array_equal(stratified_folds(ds, k, seed).fold_of, plan.fold_of)


def test_fold_plan_golden_values():
    # guards cross-platform determinism of the seeded shuffle
    plan = stratified_folds(_fixture([6, 4]), 3, seed=123)
    assert plan.fold_of.tolist() == [1, 1, 2, 0, 0, 2, 1, 0, 0, 2]


@settings(max_examples=30, deadline=None)
@given(values=st.lists(st.floats(-1e6, 1e6, allow_nan=False, width=64), min_size=4, max_size=30))
def test_csv_round_trip(tmp_path_factory, values):
    n = len(values)
    ds = make_dataset(np.array(values)[:, None], np.arange(n) % 2)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(ds, path)
    back = load_csv(path, "class")
    assert back.labels.tolist() == ds.labels.tolist()
    assert np.array_equal(back.features, ds.features)
