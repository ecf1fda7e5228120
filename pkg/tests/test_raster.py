import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edgeintel.raster import (Annotation, AnnotationError, BoundingBox, Image, PNMError,
                              SceneSpec, crop, generate_scene, read_annotations, read_pnm,
                              resize_nearest, scene_corpus, write_annotations, write_pnm)

images = st.tuples(st.integers(1, 12), st.integers(1, 12), st.sampled_from([1, 3])).flatmap(
    lambda s: arrays(np.uint8, s)).map(Image)


def test_read_p6_two_pixels():
    img = read_pnm(b"P6\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6]))
    assert (img.width, img.height, img.channels) == (2, 1, 3)
    assert img.samples == bytes([1, 2, 3, 4, 5, 6])


def test_read_p5_single_zero():
    img = read_pnm(b"P5\n1 1\n255\n\x00")
    assert (img.width, img.height, img.channels) == (1, 1, 1)
    assert img.samples == b"\x00"


def test_write_red_pixel():
    img = Image.from_samples(1, 1, 3, [255, 0, 0])
    assert write_pnm(img) == b"P6\n1 1\n255\n\xff\x00\x00"


def test_write_gray_zero_2x2():
    # 11 header bytes plus 4 samples
    data = write_pnm(Image(np.zeros((2, 2, 1), np.uint8)))
    assert data == b"P5\n2 2\n255\n" + bytes(4)
    assert len(data) == 15


def test_comments_and_odd_whitespace_accepted():
    img = read_pnm(b"P5 # hi\n 2\t1 # dims\n255\n\x07\x08")
    assert img.samples == b"\x07\x08"


@pytest.mark.parametrize("data, offset", [
    (b"P3\n1 1\n255\n0 0 0", 0),
    (b"P5\n1 1\n65535\n\x00\x00", 7),
    (b"P5\n2 2\n255\n\x00", 12),
    (b"P5\nx 1\n255\n\x00", 3),
])
def test_malformed_reports_offset(data, offset):
    with pytest.raises(PNMError) as e:
        read_pnm(data)
    assert e.value.offset == offset


@given(images)
def test_pnm_roundtrip(img):
    assert read_pnm(write_pnm(img)) == img


def test_crop_interior():
    img = Image(np.arange(16, dtype=np.uint8).reshape(4, 4, 1))
    out = crop(img, BoundingBox(1, 1, 3, 3))
    assert out.pixels[:, :, 0].tolist() == [[5, 6], [9, 10]]


def test_crop_full_box_is_identity():
    img = Image(np.arange(48, dtype=np.uint8).reshape(4, 4, 3))
    assert crop(img, BoundingBox(0, 0, 4, 4)) == img


def test_crop_clips_silently():
    img = Image(np.arange(16, dtype=np.uint8).reshape(4, 4, 1))
    out = crop(img, BoundingBox(-2, -2, 2, 2))
    assert out == crop(img, BoundingBox(0, 0, 2, 2))
    assert (out.width, out.height) == (2, 2)


def test_crop_outside_errors():
    img = Image(np.zeros((4, 4, 1), np.uint8))
    with pytest.raises(ValueError, match="empty intersection"):
        crop(img, BoundingBox(5, 5, 9, 9))


@given(images, st.integers(0, 11), st.integers(0, 11), st.integers(1, 12), st.integers(1, 12))
def test_crop_twice_with_full_box_is_idempotent(img, x, y, w, h):
    box = BoundingBox(x, y, x + w, y + h)
    try:
        once = crop(img, box)
    except ValueError:
        return
    assert crop(once, BoundingBox(0, 0, once.width, once.height)) == once


def test_zero_area_box_rejected():
    with pytest.raises(ValueError):
        BoundingBox(3, 0, 3, 5)


def test_resize_duplicates_pixels():
    img = Image(np.array([[1, 2], [3, 4]], np.uint8))
    out = resize_nearest(img, 4, 4)
    assert out.pixels[:, :, 0].tolist() == [[1, 1, 2, 2], [1, 1, 2, 2],
                                            [3, 3, 4, 4], [3, 3, 4, 4]]


@given(images)
def test_resize_same_size_is_identity(img):
    assert resize_nearest(img, img.width, img.height) == img


def test_resize_constant_stays_constant():
    img = Image(np.full((256, 256, 3), 77, np.uint8))
    out = resize_nearest(img, 64, 64)
    assert (out.width, out.height) == (64, 64)
    assert np.all(out.pixels == 77)


def test_scene_deterministic():
    a = generate_scene(SceneSpec(seed=7))
    b = generate_scene(SceneSpec(seed=7))
    assert a[0] == b[0]
    assert a[1] == b[1]


def test_flat_empty_scene_is_constant():
    img, anns = generate_scene(SceneSpec(seed=1, object_count=0, background_texture="flat"))
    assert anns == []
    assert len(np.unique(img.pixels.reshape(-1, img.channels), axis=0)) == 1


def test_overcrowded_scene_errors():
    with pytest.raises(ValueError):
        generate_scene(SceneSpec(seed=0, width=16, height=16, object_count=40))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 6), st.sampled_from(["flat", "gradient", "noise"]),
       st.sampled_from([1, 3]))
def test_scene_boxes_valid_and_disjoint(seed, count, bg, ch):
    spec = SceneSpec(seed=seed, width=96, height=80, object_count=count,
                     background_texture=bg, channels=ch, image_id="s")
    img, anns = generate_scene(spec)
    assert (img.width, img.height, img.channels) == (96, 80, ch)
    assert len(anns) == count
    for a in anns:
        assert a.box.clip(96, 80) == a.box
        assert 0 <= a.confidence <= 1
        assert a.image_id == "s"
    for a, b in zip(anns, anns[1:]):
        assert not a.box.intersects(b.box)


def test_corpus_reproducible():
    a = scene_corpus(4, 32, seed=3)
    assert a == scene_corpus(4, 32, seed=3)
    assert a != scene_corpus(4, 32, seed=4)


def test_annotation_one_line():
    anns = read_annotations(b'{"image_id": "a", "bbox": [0, 0, 2, 3], '
                            b'"class_name": "car", "confidence": 0.9}\n')
    assert anns == [Annotation("a", BoundingBox(0, 0, 2, 3), "car", 0.9)]


def test_annotation_empty_input():
    assert read_annotations(b"") == []


def test_annotation_bad_box_reports_line():
    good = '{"image_id": "a", "bbox": [0, 0, 2, 3], "class_name": "car", "confidence": 0.9}'
    bad = '{"image_id": "a", "bbox": [4, 0, 2, 3], "class_name": "car", "confidence": 0.9}'
    with pytest.raises(AnnotationError) as e:
        read_annotations(good + "\n" + bad + "\n")
    assert e.value.line == 2


@pytest.mark.parametrize("line", [
    '{"image_id": "a", "bbox": [0, 0, 2, 3], "class_name": "car", "confidence": 1.5}',
    '{"image_id": "a", "bbox": [0, 0, 2], "class_name": "car", "confidence": 0.5}',
    '{"image_id": "a", "bbox": [0, 0, 2, 3], "class_name": "car"}',
    'not json',
])
def test_annotation_rejects(line):
    with pytest.raises(AnnotationError):
        read_annotations(line)


def test_annotation_roundtrip():
    _, anns = generate_scene(SceneSpec(seed=11, image_id="x"))
    assert read_annotations(write_annotations(anns)) == anns
