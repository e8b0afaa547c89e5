"""Tests for the wavelet packet decomposition."""
from unittest import TestCase, main

import numpy as np

from vocalfold.signal_io import AudioSignal
from vocalfold.util import WaveletError
from vocalfold.wavelet import (
    WaveletFilterPair,
    WpNode,
    WpTree,
    db10_filters,
    node_energy,
    node_shannon_entropy,
    tree_energies,
    wp_decompose,
    wp_reconstruct,
    wp_step,
)


class FilterTests(TestCase):
    """Tests for the db10 filter pair."""

    def test_identities(self):
        """The db10 filters satisfy the filter identities."""
        filters = db10_filters()
        h, g = filters.lowpass, filters.highpass
        self.assertEqual(filters.taps, 20)
        self.assertAlmostEqual(h.sum(), np.sqrt(2), delta=1e-10)
        self.assertAlmostEqual(np.dot(h, h), 1, delta=1e-10)
        self.assertAlmostEqual(g.sum(), 0, delta=1e-10)
        for i in range(20):
            self.assertEqual(g[i], (-1) ** i * h[19 - i])
        for m in range(1, 10):
            self.assertAlmostEqual(np.dot(h[: 20 - 2 * m], h[2 * m :]), 0, delta=1e-10)

    def test_validation_catches_typos(self):
        """A single wrong coefficient fails validation."""
        lowpass = db10_filters().lowpass.copy()
        lowpass[7] += 1e-6
        with self.assertRaises(WaveletError):
            WaveletFilterPair.from_lowpass(lowpass.tolist()).validate()


class StepTests(TestCase):
    """Tests for a single analysis step."""

    def test_constant_input(self):
        filters = db10_filters()
        x = np.full(64, 3.0)
        np.testing.assert_allclose(wp_step(x, filters.highpass), 0, atol=1e-12)
        np.testing.assert_allclose(wp_step(x, filters.lowpass), 3 * np.sqrt(2), atol=1e-12)

    def test_direct_sum(self):
        """One analysis step matches the periodic convolution sum."""
        filters = db10_filters()
        rng = np.random.default_rng(0)
        x = rng.standard_normal(64)
        for filt in (filters.lowpass, filters.highpass):
            expected = [sum(filt[i] * x[(2 * k + i) % 64] for i in range(20)) for k in range(32)]
            np.testing.assert_allclose(wp_step(x, filt), expected, atol=1e-12)

    def test_short_input_wraps(self):
        x = np.array([1.0, -2.0])
        lowpass = db10_filters().lowpass
        self.assertAlmostEqual(wp_step(x, lowpass)[0], lowpass[0::2].sum() - 2 * lowpass[1::2].sum(), places=12)

    def test_linearity(self):
        lowpass = db10_filters().lowpass
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal((2, 128))
        np.testing.assert_allclose(
            wp_step(2.5 * x - 0.5 * y, lowpass), 2.5 * wp_step(x, lowpass) - 0.5 * wp_step(y, lowpass), atol=1e-10
        )

    def test_odd_length(self):
        """Only nonempty inputs of even length can be split."""
        with self.assertRaises(WaveletError):
            wp_step(np.zeros(7), db10_filters().lowpass)
        with self.assertRaises(WaveletError):
            wp_step(np.zeros(0), db10_filters().lowpass)


class TreeTests(TestCase):
    """Tests for the full packet tree."""

    def test_shape(self):
        """The tree has 63 nodes in breadth first order."""
        rng = np.random.default_rng(2)
        tree = wp_decompose(AudioSignal(rng.uniform(-1, 1, 1024), 8000))
        self.assertEqual(len(tree), 63)
        for k, node in enumerate(tree):
            self.assertEqual(node.index, k)
            self.assertEqual(node.coeffs.size, 1024 >> node.level)
        self.assertEqual([node.coeffs.size for node in tree.leaves], [32] * 32)
        self.assertEqual(tree.node(2, 3).index, 6)
        np.testing.assert_array_equal(tree.node(0, 0).coeffs, tree.nodes[0].coeffs)

    def test_children(self):
        filters = db10_filters()
        rng = np.random.default_rng(3)
        tree = wp_decompose(rng.standard_normal(256))
        for level in range(5):
            for position in range(2**level):
                parent = tree.node(level, position).coeffs
                np.testing.assert_allclose(tree.node(level + 1, 2 * position).coeffs, wp_step(parent, filters.lowpass))
                np.testing.assert_allclose(
                    tree.node(level + 1, 2 * position + 1).coeffs, wp_step(parent, filters.highpass)
                )

    def test_truncation(self):
        tree = wp_decompose(np.arange(100.0))
        np.testing.assert_array_equal(tree.nodes[0].coeffs, np.arange(96.0))
        with self.assertRaises(WaveletError):
            wp_decompose(np.zeros(31))

    def test_constant_signal(self):
        tree = wp_decompose(np.full(512, 0.25))
        for node in tree:
            if node.position == 0:
                np.testing.assert_allclose(node.coeffs, 0.25 * np.sqrt(2) ** node.level, atol=1e-12)
            else:
                np.testing.assert_allclose(node.coeffs, 0, atol=1e-12)

    def test_parseval(self):
        """Every level of the tree preserves the signal energy."""
        rng = np.random.default_rng(4)
        for n in (256, 1024):
            x = rng.standard_normal(n)
            tree = wp_decompose(x)
            total = float(np.dot(x, x))
            for level in range(1, 6):
                energy = sum(node_energy(node) for node in tree.level(level))
                self.assertAlmostEqual(energy / total, 1, delta=1e-8)

    def test_perfect_reconstruction(self):
        """Synthesis inverts the decomposition."""
        rng = np.random.default_rng(5)
        lengths = (32, 64, 512, 1024)
        for i in range(100):
            x = rng.standard_normal(lengths[i % 4])
            self.assertLess(np.max(np.abs(wp_reconstruct(wp_decompose(x)) - x)), 1e-9)

    def test_reconstruct_zero(self):
        tree = wp_decompose(np.zeros(128))
        np.testing.assert_array_equal(wp_reconstruct(tree), np.zeros(128))
        rng = np.random.default_rng(6)
        tree = wp_decompose(rng.standard_normal(128))
        np.testing.assert_array_equal(wp_reconstruct(tree.with_leaves(np.zeros((32, 4)))), np.zeros(128))

    def test_malformed(self):
        tree = wp_decompose(np.zeros(64))
        with self.assertRaises(WaveletError):
            WpTree(tree.nodes[:-1], 5)
        with self.assertRaises(WaveletError):
            WpTree((*tree.nodes[:-1], WpNode(5, 31, np.zeros(3))), 5)
        with self.assertRaises(WaveletError):
            tree.node(6, 0)
        with self.assertRaises(WaveletError):
            tree.with_leaves(np.zeros((32, 3)))


class NodeFeatureTests(TestCase):
    """Tests for node energies and entropies."""

    def test_energy(self):
        self.assertEqual(node_energy([0.0, 0.0, 0.0]), 0)
        self.assertEqual(node_energy([1.0]), 1)
        self.assertEqual(node_energy([3.0, 4.0]), 25)

    def test_entropy(self):
        """Silent and single coefficient nodes have zero entropy, two equal ones have ln 2."""
        self.assertEqual(node_shannon_entropy(np.zeros(5)), 0)
        self.assertEqual(node_shannon_entropy([1.0]), 0)
        self.assertAlmostEqual(node_shannon_entropy([np.sqrt(0.5), np.sqrt(0.5)]), np.log(2), places=12)

    def test_tree_energies(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(64)
        energies = tree_energies(wp_decompose(x))
        self.assertEqual(energies.shape, (63,))
        self.assertAlmostEqual(energies[0], float(np.dot(x, x)), places=10)


if __name__ == "__main__":
    main()
