import numpy as np
import pytest

from graphmrc import InputError, Vocabulary, build_input
from graphmrc.autodiff import Tensor
from graphmrc.encoder import (
    CLS,
    SEP,
    UNK,
    add_node_positions,
    encode_tokens,
    init_encoder,
    init_node_features,
    sinusoid_table,
)


@pytest.fixture
def small_vocab():
    return Vocabulary.from_corpus(["a b", "q", "c"])


class TestVocabulary:
    def test_specials_distinct_and_unknown_maps_to_unk(self, small_vocab):
        assert small_vocab.encode("zzz") == UNK
        ids = [small_vocab.encode(t) for t in ("a", "b", "c", "q")]
        assert len(set(ids)) == 4
        assert min(ids) >= 4

    def test_save_load_round_trip(self, small_vocab, tmp_path):
        path = tmp_path / "vocab.txt"
        small_vocab.save(path)
        loaded = Vocabulary.load(path)
        assert loaded.tokens == small_vocab.tokens
        # one token per line, line number = id after the specials
        lines = path.read_text(encoding="utf-8").splitlines()
        for lineno, token in enumerate(lines):
            assert loaded.encode(token) == lineno + 4

    def test_duplicate_tokens_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(("a", "a"))


class TestBuildInput:
    def test_direct_construction(self, small_vocab, lexicon):
        seq = build_input("a b", "q", "c", small_vocab, lexicon)
        a, b, c, q = (small_vocab.encode(t) for t in "abcq")
        assert seq.ids.tolist() == [CLS, a, b, SEP, q, SEP, c, SEP]
        assert seq.length == 8
        assert seq.cls_span == (0, 1)
        assert seq.context_span == (1, 3)
        assert seq.question_span == (4, 5)
        assert seq.option_span == (6, 7)

    def test_spans_partition_sequence(self, small_vocab, lexicon):
        seq = build_input("a b", "q", "c", small_vocab, lexicon)
        spans = [seq.cls_span, seq.context_span, seq.question_span, seq.option_span]
        covered = set()
        for start, stop in spans:
            covered.update(range(start, stop))
        seps = {seq.context_span[1], seq.question_span[1], seq.option_span[1]}
        assert covered | seps == set(range(seq.length))
        assert all(seq.ids[i] == SEP for i in seps)

    def test_truncation_keeps_question_and_option(self, lexicon):
        context = " ".join(f"tok{i}" for i in range(300))
        vocab = Vocabulary.from_corpus([context, "the question", "the option"])
        seq = build_input(context, "the question", "the option", vocab, lexicon, max_seq_len=256)
        assert seq.length == 256
        assert seq.question_span[1] - seq.question_span[0] == 2
        assert seq.option_span[1] - seq.option_span[0] == 2
        # context lost exactly the overflow
        assert seq.context_span[1] - seq.context_span[0] == 256 - 4 - 2 - 2

    def test_truncation_preserves_alignment_consistency(self, lexicon):
        context = ". ".join(f"alice sings tok{i}" for i in range(60))
        vocab = Vocabulary.from_corpus([context, "q", "c"])
        seq = build_input(context, "q", "c", vocab, lexicon, max_seq_len=64)
        n = seq.length
        assert n == 64
        assert len(seq.logic_alignment) == len(seq.logic_graph.nodes)
        for start, stop in seq.logic_alignment + seq.syntax_alignment:
            assert 0 <= start < stop <= n

    def test_one_sequence_per_option(self, small_vocab, lexicon):
        seqs = [build_input("a b", "q", opt, small_vocab, lexicon) for opt in ("a", "b", "c")]
        assert len({tuple(s.ids.tolist()) for s in seqs}) == 3

    def test_empty_option_rejected(self, small_vocab, lexicon):
        with pytest.raises(InputError, match="option"):
            build_input("a b", "q", "", small_vocab, lexicon)

    def test_empty_context_and_option_rejected(self, small_vocab, lexicon):
        with pytest.raises(InputError, match="both empty"):
            build_input("", "q", "", small_vocab, lexicon)

    def test_overlong_question_rejected(self, small_vocab, lexicon):
        with pytest.raises(InputError, match="max_seq_len"):
            build_input("a", " ".join(["q"] * 30), "c", small_vocab, lexicon, max_seq_len=16)

    def test_graphs_cover_context_and_option(self, lexicon):
        context = "alice sings if bob dances. carol smiles."
        option = "dave laughs because erin waves"
        vocab = Vocabulary.from_corpus([context, "why ?", option])
        seq = build_input(context, "why ?", option, vocab, lexicon)
        assert len(seq.logic_graph.nodes) == 5  # 3 context units + 2 option units
        # option units aligned inside the option span
        for start, stop in seq.logic_alignment[-2:]:
            assert seq.option_span[0] <= start < stop <= seq.option_span[1]
        # the option-internal pair exists, and no pair crosses the join
        conditions = {p.condition_id for p in seq.logic_graph.pairs}
        assert len(seq.logic_graph.pairs) == 2
        assert all(
            (p.condition_id <= 3) == (p.result_id <= 3) for p in seq.logic_graph.pairs
        )

    def test_alignment_lies_in_context_or_option(self, lexicon):
        context = "alice sings. bob dances."
        vocab = Vocabulary.from_corpus([context, "q", "alice sings"])
        seq = build_input(context, "q", "alice sings", vocab, lexicon)
        ctx, opt = seq.context_span, seq.option_span
        for start, stop in seq.logic_alignment + seq.syntax_alignment:
            inside_ctx = ctx[0] <= start < stop <= ctx[1]
            inside_opt = opt[0] <= start < stop <= opt[1]
            assert inside_ctx or inside_opt


class TestEncodeTokens:
    def test_output_shape(self, small_vocab, lexicon, rng):
        params = init_encoder(rng, small_vocab.size, dim=16, heads=2, layers=2, dtype=np.float64)
        seq = build_input("a b", "q", "c", small_vocab, lexicon)
        out = encode_tokens(seq, params)
        assert out.shape == (8, 16)

    def test_deterministic(self, small_vocab, lexicon, rng):
        params = init_encoder(rng, small_vocab.size, dim=16, heads=2, layers=2, dtype=np.float64)
        seq = build_input("a b", "q", "c", small_vocab, lexicon)
        a = encode_tokens(seq, params).data
        b = encode_tokens(seq, params).data
        assert (a == b).all()

    def test_position_sensitivity(self, small_vocab, lexicon, rng):
        params = init_encoder(rng, small_vocab.size, dim=16, heads=2, layers=2, dtype=np.float64)
        a = encode_tokens(build_input("a b", "q", "c", small_vocab, lexicon), params).data
        b = encode_tokens(build_input("b a", "q", "c", small_vocab, lexicon), params).data
        assert not np.allclose(a, b)


class TestNodeFeatures:
    def test_single_token_node_copies_row(self, rng):
        feats = Tensor(rng.standard_normal((6, 4)), dtype=np.float64)
        nodes = init_node_features(feats, [(2, 3)])
        assert np.array_equal(nodes.data[0], feats.data[2])

    def test_two_token_mean(self, rng):
        feats = Tensor(rng.standard_normal((6, 4)), dtype=np.float64)
        nodes = init_node_features(feats, [(1, 3)])
        assert np.allclose(nodes.data[0], (feats.data[1] + feats.data[2]) / 2, atol=1e-12)

    def test_worked_example_has_five_rows(self, lexicon, golfing_context):
        vocab = Vocabulary.from_corpus([golfing_context, "q", "x"])
        seq = build_input(golfing_context, "q", "x", vocab, lexicon)
        feats = Tensor(np.random.default_rng(0).standard_normal((seq.length, 8)), dtype=np.float64)
        # 5 context units + 1 option unit
        nodes = init_node_features(feats, seq.logic_alignment)
        assert nodes.shape == (6, 8)
        assert len(seq.logic_graph.nodes) == 6

    def test_mean_matches_loop_oracle(self, rng):
        feats = Tensor(rng.standard_normal((10, 5)), dtype=np.float64)
        intervals = [(0, 3), (3, 4), (4, 10)]
        nodes = init_node_features(feats, intervals)
        for k, (start, stop) in enumerate(intervals):
            expected = sum(feats.data[i] for i in range(start, stop)) / (stop - start)
            assert np.abs(nodes.data[k] - expected).max() < 1e-12

    def test_empty_interval_rejected(self, rng):
        feats = Tensor(rng.standard_normal((4, 3)), dtype=np.float64)
        with pytest.raises(ValueError):
            init_node_features(feats, [(2, 2)])
        with pytest.raises(ValueError):
            init_node_features(feats, [])


class TestNodePositions:
    def test_row_zero_is_alternating_pattern(self):
        table = sinusoid_table(4, 6, np.float64)
        assert np.allclose(table[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])

    def test_table_deterministic(self):
        a = sinusoid_table(7, 12, np.float64)
        b = sinusoid_table(7, 12, np.float64)
        assert (a == b).all()

    def test_added_positions_recoverable(self, rng):
        feats = Tensor(rng.standard_normal((5, 8)), dtype=np.float64)
        out = add_node_positions(feats)
        recovered = out.data - feats.data
        assert np.abs(recovered - sinusoid_table(5, 8, np.float64)).max() < 1e-12

    def test_learned_table_slice(self, rng):
        feats = Tensor(rng.standard_normal((3, 4)), dtype=np.float64)
        table = Tensor(rng.standard_normal((10, 4)), requires_grad=True, dtype=np.float64)
        out = add_node_positions(feats, table)
        assert np.allclose(out.data, feats.data + table.data[:3])
