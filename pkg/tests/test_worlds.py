"""Synthetic world generators: determinism, confound structure, labels."""

import numpy as np
import pytest

from reasonpref import worlds
from reasonpref.geometry import softmax
from reasonpref.worlds import (
    SPLIT_TRAIN,
    SPLIT_VAL_OOD,
    ConfoundTask,
    ConfoundWorldConfig,
    WorldError,
    build_transfer_suite,
    component_totals,
    confound_paraphrases,
    default_confound_config,
    default_transfer_config,
    diversity_confound_config,
    gen_confound_pairs,
    gen_confound_trajectory,
    gen_featureworld_pairs,
    gen_featureworld_trajectory,
    label_preference,
    sample_rationale,
)


def _rng(seed=0):
    return np.random.default_rng(seed)


class TestConfoundTrajectory:
    def setup_method(self):
        self.cfg = default_confound_config(n_tasks=2, seed=1)
        self.task = self.cfg.tasks[0].task_string

    def test_swap_exchanges_color_blocks_only(self):
        a = gen_confound_trajectory(self.cfg, self.task, "larger", False, _rng(5))
        b = gen_confound_trajectory(self.cfg, self.task, "larger", True, _rng(5))
        sa, sb = a.steps, b.steps
        # the color blocks swap between slots; everything else is untouched
        w, c = worlds._SLOT_WIDTH, 2 * worlds._COLOR_BLOCK
        np.testing.assert_array_equal(sa[:, 0:c], sb[:, w : w + c])
        np.testing.assert_array_equal(sa[:, w : w + c], sb[:, 0:c])
        keep = (
            list(range(c, w)) + list(range(w + c, 2 * w)) + list(range(2 * w, self.cfg.step_dim))
        )
        np.testing.assert_array_equal(sa[:, keep], sb[:, keep])

    def test_approach_signature(self):
        # the targeted object's distance strictly shrinks over the segment
        for seed in range(40):
            for target in ("larger", "smaller"):
                seg = gen_confound_trajectory(self.cfg, self.task, target, False, _rng(seed))
                sizes = seg.steps[0, list(worlds.SIZE_COLUMNS)]
                slot = int(np.argmax(sizes)) if target == "larger" else int(np.argmin(sizes))
                dists = seg.steps[:, worlds.DIST_COLUMNS[slot]]
                assert np.all(np.diff(dists) < 0)
                assert dists[-1] < dists[0]

    def test_determinism(self):
        a = gen_confound_trajectory(self.cfg, self.task, "larger", False, _rng(9))
        b = gen_confound_trajectory(self.cfg, self.task, "larger", False, _rng(9))
        assert np.array_equal(a.steps, b.steps)

    def test_unknown_task_rejected(self):
        with pytest.raises(WorldError, match="unknown task"):
            gen_confound_trajectory(self.cfg, "no such task", "larger", False, _rng(0))

    def test_color_follows_task_configuration(self):
        for task in self.cfg.tasks:
            seg = gen_confound_trajectory(self.cfg, task.task_string, "larger", False, _rng(3))
            sizes = seg.steps[0, list(worlds.SIZE_COLUMNS)]
            larger_slot = int(np.argmax(sizes))
            red = seg.steps[0, worlds.RED_COLUMNS[larger_slot]]
            expected_red = 1.0 if task.larger_color == worlds.RED else 0.0
            assert red == expected_red


class TestConfoundPairs:
    def setup_method(self):
        self.cfg = default_confound_config(n_tasks=2, seed=2)

    def test_label_balance(self):
        pairs = gen_confound_pairs(self.cfg, 1000, swapped=False)
        assert len(pairs) == 2000
        for task in self.cfg.tasks:
            ys = [p.y for p in pairs if p.task == task.task_string]
            frac = np.mean(ys)
            assert 0.4 < frac < 0.6

    def test_label_marks_larger_target(self):
        # regenerate each pair's two trajectories from the same substream:
        # the preferred side must be the larger-target segment, bitwise
        pairs = gen_confound_pairs(self.cfg, 50, swapped=False)
        i = 0
        for task_idx, task in enumerate(self.cfg.tasks):
            for k in range(50):
                p = pairs[task_idx * 50 + k]
                rng = worlds._pair_rng(self.cfg.seed, worlds._PAIR_SALT, task_idx, k)
                larger = gen_confound_trajectory(self.cfg, task.task_string, "larger", False, rng)
                pref = p.seg_a if p.y == 1 else p.seg_b
                assert np.array_equal(pref.steps, larger.steps)
                i += 1
        assert i == len(pairs)

    def test_sizes_unchanged_by_swap(self):
        # the causal feature's distribution is identical across ID and OOD
        id_pairs = gen_confound_pairs(self.cfg, 300, swapped=False)
        ood_pairs = gen_confound_pairs(self.cfg, 300, swapped=True)
        cols = list(worlds.SIZE_COLUMNS)
        sizes_id = np.sort(np.concatenate([p.seg_a.steps[0, cols] for p in id_pairs]))
        sizes_ood = np.sort(np.concatenate([p.seg_a.steps[0, cols] for p in ood_pairs]))
        np.testing.assert_array_equal(sizes_id, sizes_ood)

    def test_pairs_share_task(self):
        for p in gen_confound_pairs(self.cfg, 20, swapped=False):
            assert p.seg_a.source_task == p.seg_b.source_task == p.task

    def test_swapped_marks_val_ood(self):
        assert all(p.split == SPLIT_VAL_OOD for p in gen_confound_pairs(self.cfg, 5, swapped=True))
        assert all(p.split == SPLIT_TRAIN for p in gen_confound_pairs(self.cfg, 5, swapped=False))

    def test_train_color_size_correlation_is_perfect(self):
        pairs = gen_confound_pairs(self.cfg, 100, swapped=False)
        for task in self.cfg.tasks:
            expected_red = 1.0 if task.larger_color == worlds.RED else 0.0
            for p in pairs:
                if p.task != task.task_string:
                    continue
                for seg in (p.seg_a, p.seg_b):
                    sizes = seg.steps[0, list(worlds.SIZE_COLUMNS)]
                    larger_slot = int(np.argmax(sizes))
                    assert seg.steps[0, worlds.RED_COLUMNS[larger_slot]] == expected_red

    def test_ood_correlation_is_inverted(self):
        pairs = gen_confound_pairs(self.cfg, 100, swapped=True)
        for task in self.cfg.tasks:
            expected_red = 0.0 if task.larger_color == worlds.RED else 1.0
            for p in pairs:
                if p.task != task.task_string:
                    continue
                sizes = p.seg_a.steps[0, list(worlds.SIZE_COLUMNS)]
                larger_slot = int(np.argmax(sizes))
                assert p.seg_a.steps[0, worlds.RED_COLUMNS[larger_slot]] == expected_red

    def test_byte_identical_datasets_per_seed(self):
        a = gen_confound_pairs(self.cfg, 30, swapped=False)
        b = gen_confound_pairs(self.cfg, 30, swapped=False)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.seg_a.steps, pb.seg_a.steps)
            assert np.array_equal(pa.seg_b.steps, pb.seg_b.steps)
            assert (pa.y, pa.reason, pa.task) == (pb.y, pb.reason, pb.task)

    def test_diversity_mode_samples_paraphrases(self):
        cfg = diversity_confound_config(n_tasks=2, seed=4)
        paras = confound_paraphrases(cfg)
        for task, strings in paras.items():
            assert len(strings) == 16
            assert len(set(strings)) == 16
        pairs = gen_confound_pairs(cfg, 200, swapped=False)
        seen = {p.task: set() for p in pairs}
        for p in pairs:
            assert p.reason in paras[p.task]
            seen[p.task].add(p.reason)
        for task, got in seen.items():
            assert len(got) >= 12  # uniform sampling covers most of 16


class TestSlotRandomization:
    def test_larger_slot_varies(self):
        cfg = default_confound_config(n_tasks=1, seed=3)
        slots = []
        for seed in range(60):
            seg = gen_confound_trajectory(cfg, cfg.tasks[0].task_string, "larger", False, _rng(seed))
            slots.append(int(np.argmax(seg.steps[0, list(worlds.SIZE_COLUMNS)])))
        assert 10 < sum(slots) < 50  # both slot orders occur

    def test_slot_permutation_preserves_object_evidence(self):
        # exchanging the two slots relocates each object's features and swaps
        # the distance columns; nothing about the objects themselves changes,
        # so the preference evidence (hence the label) is slot-order invariant
        cfg = default_confound_config(n_tasks=1, seed=3)
        seg = gen_confound_trajectory(cfg, cfg.tasks[0].task_string, "larger", False, _rng(4))
        s0, s1 = worlds.SLOT_FEATURE_SLICES
        d0, d1 = worlds.DIST_COLUMNS
        permuted = seg.steps.copy()
        permuted[:, s0], permuted[:, s1] = seg.steps[:, s1], seg.steps[:, s0].copy()
        permuted[:, d0], permuted[:, d1] = seg.steps[:, d1], seg.steps[:, d0].copy()
        # object-keyed views coincide: slot k of the permuted segment is slot
        # 1-k of the original, including its gripper distance
        slices = (s0, s1)
        for k in (0, 1):
            np.testing.assert_array_equal(permuted[:, slices[k]], seg.steps[:, slices[1 - k]])
            np.testing.assert_array_equal(
                permuted[:, worlds.DIST_COLUMNS[k]], seg.steps[:, worlds.DIST_COLUMNS[1 - k]]
            )


class TestFeatureWorld:
    def setup_method(self):
        self.cfg = default_transfer_config(seed=5)

    def test_zero_noise_monotone_in_optimality(self):
        cfg = default_transfer_config(seed=6, slope_noise=0.0, step_noise=0.0)
        task = cfg.tasks[0]
        _, t_hi = gen_featureworld_trajectory(cfg, task.task_string, 0.0, _rng(1))
        _, t_lo = gen_featureworld_trajectory(cfg, task.task_string, 0.6, _rng(2))
        assert task.weights @ t_hi > task.weights @ t_lo

    def test_inactive_components_stay_flat(self):
        cfg = default_transfer_config(seed=7, step_noise=0.0, slope_noise=0.0)
        task = cfg.tasks[0]  # no grasp/lift/carry/waypoint
        seg, totals = gen_featureworld_trajectory(cfg, task.task_string, 0.0, _rng(3))
        inactive = np.flatnonzero(task.weights == 0)
        assert np.all(totals[inactive] == 0.0)
        np.testing.assert_array_equal(seg.steps[:, inactive], 0.0)

    def test_determinism(self):
        a = gen_featureworld_trajectory(self.cfg, self.cfg.tasks[1].task_string, 0.3, _rng(11))
        b = gen_featureworld_trajectory(self.cfg, self.cfg.tasks[1].task_string, 0.3, _rng(11))
        assert np.array_equal(a[0].steps, b[0].steps)
        assert np.array_equal(a[1], b[1])

    def test_totals_recoverable_from_stored_steps(self):
        seg, totals = gen_featureworld_trajectory(self.cfg, self.cfg.tasks[0].task_string, 0.3, _rng(12))
        np.testing.assert_allclose(component_totals(self.cfg, seg), totals, atol=1e-9)

    def test_label_consistency(self):
        pairs = gen_featureworld_pairs(self.cfg, self.cfg.tasks[0].task_string, 200)
        w = self.cfg.tasks[0].weights
        ties = 0
        for p in pairs:
            ta = component_totals(self.cfg, p.seg_a)
            tb = component_totals(self.cfg, p.seg_b)
            sa, sb = w @ ta, w @ tb
            if sa == sb:
                ties += 1
                continue
            assert p.y == (1 if sa > sb else 0)
        assert ties <= 2


class TestLabelPreference:
    def test_clear_winner(self):
        w = np.array([1.0, 2.0])
        assert label_preference(np.array([1.0, 1.0]), np.array([0.0, 0.0]), w, _rng(0)) == 1
        assert label_preference(np.array([0.0, 0.0]), np.array([1.0, 1.0]), w, _rng(0)) == 0

    def test_tie_breaks_fairly(self):
        w = np.array([1.0])
        t = np.array([0.5])
        draws = [label_preference(t, t, w, _rng(s)) for s in range(400)]
        assert 120 < sum(draws) < 280


class TestSampleRationale:
    def test_single_active_component(self):
        rationales = ["r0", "r1", "r2"]
        active = np.array([False, True, False])
        w = np.array([0.0, 1.0, 0.0])
        out = sample_rationale(np.ones(3), np.zeros(3), w, active, _rng(1), rationales)
        assert out == "r1"

    def test_equal_advantages_sample_uniformly(self):
        rationales = ["r0", "r1"]
        active = np.array([True, True])
        w = np.ones(2)
        tp, to = np.array([1.0, 1.0]), np.array([0.0, 0.0])
        rng = _rng(2)
        draws = [sample_rationale(tp, to, w, active, rng, rationales) for _ in range(10_000)]
        frac = np.mean([d == "r0" for d in draws])
        assert abs(frac - 0.5) < 0.03

    def test_log3_advantage_frequencies(self):
        rationales = ["strong", "weak"]
        active = np.array([True, True])
        w = np.ones(2)
        tp, to = np.array([np.log(3.0), 0.0]), np.zeros(2)
        expected = softmax(np.array([np.log(3.0), 0.0]))
        rng = _rng(3)
        draws = [sample_rationale(tp, to, w, active, rng, rationales) for _ in range(10_000)]
        frac = np.mean([d == "strong" for d in draws])
        assert abs(frac - expected[0]) < 0.02

    def test_no_active_components_rejected(self):
        with pytest.raises(WorldError):
            sample_rationale(np.ones(2), np.zeros(2), np.ones(2), np.zeros(2, dtype=bool), _rng(0), ["a", "b"])


class TestTransferSuite:
    def test_default_weights_satisfy_composition(self):
        cfg = default_transfer_config(seed=8)
        w = [t.weights for t in cfg.tasks]
        np.testing.assert_allclose(w[3], w[2] - (w[1] - w[0]), atol=1e-12)

    def test_heldout_has_no_train_pairs(self):
        cfg = default_transfer_config(seed=9)
        suite = build_transfer_suite(cfg, n_train=5, n_val=5)
        assert suite.heldout_task == cfg.tasks[3].task_string
        assert suite.heldout_task not in suite.train
        assert all(p.split != SPLIT_TRAIN for p in suite.heldout_val)

    def test_shared_components_reuse_identical_rationales(self):
        cfg = default_transfer_config(seed=10)
        # the goal component's rationale is the same string for every task
        goal = [c for c in cfg.components if c.name == "goal"][0]
        assert goal.rationale == "finishes at goal spot"
        pairs_a = gen_featureworld_pairs(cfg, cfg.tasks[0].task_string, 300)
        pairs_c = gen_featureworld_pairs(cfg, cfg.tasks[2].task_string, 300)
        reasons_a = {p.reason for p in pairs_a}
        reasons_c = {p.reason for p in pairs_c}
        assert goal.rationale in reasons_a and goal.rationale in reasons_c

    def test_broken_composition_rejected(self):
        cfg = default_transfer_config(seed=11)
        cfg.tasks[3].weights = cfg.tasks[3].weights + 0.5
        with pytest.raises(WorldError, match="compositionality"):
            build_transfer_suite(cfg, n_train=2, n_val=2)

    def test_inactive_components_never_sampled_as_rationale(self):
        cfg = default_transfer_config(seed=12)
        task = cfg.tasks[0]
        inactive_rationales = {
            c.rationale for c, w in zip(cfg.components, task.weights) if w == 0
        }
        pairs = gen_featureworld_pairs(cfg, task.task_string, 300)
        assert all(p.reason not in inactive_rationales for p in pairs)


class TestConfigValidation:
    def test_duplicate_task_strings_rejected(self):
        t = ConfoundTask("same", 0, worlds.RED)
        with pytest.raises(WorldError):
            ConfoundWorldConfig(tasks=[t, ConfoundTask("same", 1, worlds.BLUE)])

    def test_bad_color_rejected(self):
        with pytest.raises(WorldError):
            ConfoundTask("x", 0, "green")

    def test_all_zero_weights_rejected(self):
        from reasonpref.worlds import FeatureTask

        with pytest.raises(WorldError):
            FeatureTask("t", np.zeros(3))
