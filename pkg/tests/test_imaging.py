import numpy as np
import pytest

from mrkernel.exceptions import (
    CorruptFile,
    MalformedHeader,
    ManifestError,
    TreeShapeMismatch,
    TruncatedPixelData,
    UnsupportedMaxval,
)
from mrkernel.hierarchy import build_uniform_tree
from mrkernel.imaging import (
    RawImage,
    dataset_bytes,
    dump_ppm,
    grid_leaf_map,
    image_to_nested,
    ingest_manifest,
    load_dataset,
    load_ppm,
    parse_dataset,
    quantize,
    quantize_pixels,
    read_manifest,
    save_dataset,
    synth_dataset,
)


def _image(pixels) -> RawImage:
    pixels = np.asarray(pixels, dtype=np.uint8)
    return RawImage(pixels.shape[1], pixels.shape[0], pixels)


def _same_bag(a, b) -> bool:
    # leaf 합산 순서가 달라 마지막 비트는 다를 수 있음
    return np.array_equal(a.indices, b.indices) and np.allclose(a.masses, b.masses, rtol=0.0, atol=1e-15)


@pytest.fixture
def write_ppm(tmp_path):
    def _write(name, pixels):
        path = tmp_path / name
        path.write_bytes(dump_ppm(_image(pixels)))
        return path
    return _write


class TestPpm:
    def test_single_pixel(self):
        img = load_ppm(b"P6\n1 1\n255\n\xff\x00\x00")
        assert (img.width, img.height) == (1, 1)
        assert img.pixels[0, 0].tolist() == [255, 0, 0]

    def test_header_comments(self):
        img = load_ppm(b"P6 # comment\n2 # w\n1\n255\n" + bytes(range(6)))
        assert img.pixels.shape == (1, 2, 3)
        assert img.pixels[0, 1].tolist() == [3, 4, 5]

    def test_ascii_variant_rejected(self):
        with pytest.raises(MalformedHeader):
            load_ppm(b"P3\n1 1\n255\n255 0 0\n")

    def test_truncated(self):
        with pytest.raises(TruncatedPixelData):
            load_ppm(b"P6\n2 2\n255\n" + bytes(9))

    def test_maxval(self):
        with pytest.raises(UnsupportedMaxval):
            load_ppm(b"P6\n1 1\n65535\n" + bytes(6))

    def test_dump_load(self, rng):
        pixels = rng.integers(0, 256, size=(3, 5, 3), dtype=np.uint8)
        img = load_ppm(dump_ppm(_image(pixels)))
        assert np.array_equal(img.pixels, pixels)


class TestQuantize:
    @pytest.mark.parametrize("rgb,index", [((0, 0, 0), 0), ((255, 255, 255), 511), ((255, 0, 0), 448), ((31, 32, 64), 10)])
    def test_values(self, rgb, index):
        assert quantize(*rgb) == index

    def test_surjective_and_constant_on_subcubes(self):
        # 각 축 8 간격 샘플: sub-cube마다 4개 값
        levels = np.arange(0, 256, 8, dtype=np.uint8)
        r, g, b = np.meshgrid(levels, levels, levels, indexing="ij")
        codes = quantize_pixels(np.stack([r, g, b], axis=-1))
        assert np.unique(codes).size == 512
        assert np.all(codes[:4, :4, :4] == 0)
        assert np.all(codes[-4:, -4:, -4:] == 511)


class TestImageToNested:
    def test_one_pixel(self):
        tree = build_uniform_tree(4, 1, 0.0)
        nm = image_to_nested(_image([[[255, 0, 0]]]), tree, 2)
        masses = [leaf.entries for leaf in nm.leaf_measures]
        assert masses.count([(448, 1.0)]) == 1
        assert nm.total_mass == 1.0

    def test_two_by_two(self):
        tree = build_uniform_tree(4, 1, 0.0)
        pixels = [[[0, 0, 0], [255, 0, 0]], [[0, 255, 0], [0, 0, 255]]]
        nm = image_to_nested(_image(pixels), tree, 2)
        assert [leaf.entries for leaf in nm.leaf_measures] == [
            [(0, 0.25)], [(448, 0.25)], [(56, 0.25)], [(7, 0.25)],
        ]

    def test_grid_nesting_row_major(self):
        tree = build_uniform_tree(4, 2, 0.0)
        cells = grid_leaf_map(tree, 2)
        assert cells[:2, :2].tolist() == [[0, 1], [2, 3]]
        assert cells[0, 2] == 4
        assert cells[2, 0] == 8
        assert sorted(cells.ravel().tolist()) == list(range(16))

    def test_cell_counts(self, rng):
        tree = build_uniform_tree(4, 2, 0.0)
        pixels = rng.integers(0, 256, size=(384, 256, 3), dtype=np.uint8)
        nm = image_to_nested(_image(pixels), tree, 2)
        assert len(nm.leaf_measures) == 16
        # 256/4 × 384/4 픽셀
        for leaf in nm.leaf_measures:
            assert leaf.masses.sum() == pytest.approx(64 * 96 / 98304, abs=1e-12)
        assert nm.total_mass == pytest.approx(1.0, abs=1e-9)

    def test_uneven_size_covers_all_pixels(self, rng):
        tree = build_uniform_tree(9, 1, 0.0)
        pixels = rng.integers(0, 256, size=(7, 5, 3), dtype=np.uint8)
        nm = image_to_nested(_image(pixels), tree, 3)
        assert nm.total_mass == pytest.approx(1.0, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(TreeShapeMismatch):
            image_to_nested(_image([[[0, 0, 0]]]), build_uniform_tree(4, 1, 0.0), 3)


class TestSynthDataset:
    def test_deterministic(self):
        a = synth_dataset(2, 1, 2, seed=7)
        b = synth_dataset(2, 1, 2, seed=7)
        assert dataset_bytes(a) == dataset_bytes(b)

    def test_labels(self):
        ds = synth_dataset(2, 3, 2, seed=0)
        assert ds.labels == [0, 0, 0, 1, 1, 1]

    def test_noise_free_layout(self):
        ds = synth_dataset(2, 1, 2, seed=0, noise_rate=0.0)
        a, b = ds.records[0].nested, ds.records[1].nested
        assert a.root_measure.indices.tolist() == b.root_measure.indices.tolist()
        assert a.root_measure.masses == pytest.approx(b.root_measure.masses, abs=1e-15)
        differing = sum(x != y for x, y in zip(a.leaf_measures, b.leaf_measures))
        assert differing >= len(a.leaf_measures) / 2

    def test_global_histograms_match_without_noise(self):
        ds = synth_dataset(2, 3, 2, seed=3, depth=2, noise_rate=0.0)
        first = ds.records[0].nested.root_measure
        for record in ds.records[1:]:
            assert _same_bag(record.nested.root_measure, first)

    def test_class_noise_is_independent(self):
        ds = synth_dataset(2, 6, 2, seed=3, depth=2)
        roots_a = [r.nested.root_measure for r in ds.records[:6]]
        roots_b = [r.nested.root_measure for r in ds.records[6:]]
        # B가 A의 회전 복제본이면 같은 전역 bag이 양쪽 클래스에 나타남
        assert not any(_same_bag(a, b) for a in roots_a for b in roots_b)


class TestManifest:
    def test_one_line(self, tmp_path, write_ppm):
        write_ppm("a.ppm", [[[10, 20, 30]] * 4] * 4)
        manifest = tmp_path / "list.txt"
        manifest.write_text("# images\na.ppm,3\n")
        ds = ingest_manifest(manifest, 2, 1)
        assert ds.labels == [3]
        assert ds.tree.leaf_count == 4

    def test_missing_file_names_line(self, tmp_path, write_ppm):
        write_ppm("a.ppm", [[[0, 0, 0]]])
        manifest = tmp_path / "list.txt"
        manifest.write_text("a.ppm,0\nmissing.ppm,1\n")
        with pytest.raises(ManifestError) as info:
            ingest_manifest(manifest, 2, 1)
        assert info.value.details["line"] == 2

    def test_bad_label(self, tmp_path):
        manifest = tmp_path / "list.txt"
        manifest.write_text("a.ppm,x\n")
        with pytest.raises(ManifestError):
            read_manifest(manifest)

    def test_full_size_image_three_by_three_grid(self, tmp_path, write_ppm, rng):
        write_ppm("big.ppm", rng.integers(0, 256, size=(384, 256, 3), dtype=np.uint8))
        manifest = tmp_path / "list.txt"
        manifest.write_text("big.ppm,0\n")
        ds = ingest_manifest(manifest, 3, 2, threads=2)
        assert len(ds.records[0].nested.leaf_measures) == 81


class TestDatasetFile:
    def test_save_load(self, tmp_path):
        ds = synth_dataset(2, 2, 3, seed=1, depth=1)
        path = tmp_path / "d.mrkd"
        save_dataset(path, ds, {"command": "synth", "options": {}})
        loaded = load_dataset(path)
        assert loaded.labels == ds.labels
        assert loaded.tree.same_shape(ds.tree)
        assert [r.nested for r in loaded.records] == [r.nested for r in ds.records]
        assert loaded.meta["run"]["command"] == "synth"

    def test_depth_zero(self, tmp_path):
        ds = synth_dataset(2, 1, 2, seed=1, depth=0)
        loaded = parse_dataset(dataset_bytes(ds))
        assert loaded.tree.n_nodes == 1

    def test_corrupt(self):
        data = dataset_bytes(synth_dataset(2, 1, 2, seed=1))
        with pytest.raises(CorruptFile):
            parse_dataset(b"XXXXX" + data[5:])
        with pytest.raises(CorruptFile):
            parse_dataset(data[:-3])
        with pytest.raises(CorruptFile):
            parse_dataset(data + b"\x00")
