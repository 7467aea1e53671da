from __future__ import annotations

import numpy as np
import pytest

from transpose_kit.autodiff import Tensor, no_grad
from transpose_kit.errors import ConstructionError, DimensionError
from transpose_kit.nn import LayerSpec, Model, build_model, preset, transpose_layer

ZOO = [
    ("fc-1", "mnist_fc", {"width": 12, "depth": 1, "image_shape": (1, 8, 8)}),
    ("fc-2", "mnist_fc", {"width": 12, "depth": 2, "image_shape": (1, 8, 8)}),
    ("fc-3", "mnist_fc", {"width": 12, "depth": 3, "image_shape": (1, 8, 8)}),
    ("cnn-gray", "mnist_cnn", {"channels": 4, "depth": 2, "image_shape": (1, 8, 8)}),
    ("cnn-rgb", "cifar_cnn", {"channels": 4, "depth": 2, "image_shape": (3, 8, 8)}),
    ("vit", "tiny_vit", {"embed_dim": 8, "blocks": 2, "heads": 2, "patch": 4, "image_shape": (1, 8, 8)}),
]


def _build(name: str, options: dict[str, object]) -> Model:
    specs, shape = preset(name, classes=3, **options)
    return build_model(specs, shape, seed=0)


@pytest.fixture(params=ZOO, ids=[z[0] for z in ZOO])
def zoo_model(request: pytest.FixtureRequest) -> Model:
    _, name, options = request.param
    return _build(name, options)


def test_transpose_is_an_involution(zoo_model: Model) -> None:
    twice = zoo_model.transpose().transpose()
    assert twice.layers == zoo_model.layers
    assert twice.direction == "forward"


def test_shapes_are_dual(zoo_model: Model) -> None:
    transposed = zoo_model.transpose()
    assert transposed.input_shape == zoo_model.output_shape
    assert transposed.output_shape == zoo_model.input_shape
    for forward_layer, backward_layer in zip(
        zoo_model.layers, reversed(transposed.layers), strict=True
    ):
        if forward_layer.kind == "positional_encoding":
            continue
        assert backward_layer.in_shape == forward_layer.out_shape
        assert backward_layer.out_shape == forward_layer.in_shape


def test_parameters_are_shared_buffers(zoo_model: Model) -> None:
    transposed = zoo_model.transpose()
    assert transposed.params is zoo_model.params
    forward_weights = {id(p.data) for p in zoo_model.parameters()}
    transposed_weights = {id(p.data) for p in transposed.parameters()}
    assert forward_weights & transposed_weights


def test_both_directions_run(zoo_model: Model, rng: np.random.Generator) -> None:
    x = rng.uniform(size=(2, *zoo_model.input_shape))
    with no_grad():
        logits = zoo_model(Tensor(x))
        image = zoo_model.transpose()(Tensor(rng.uniform(size=(2, *zoo_model.output_shape))))
    assert logits.shape == (2, 3)
    assert image.shape == (2, *zoo_model.input_shape)


def test_transposed_images_are_in_unit_range(fc_model: Model, rng: np.random.Generator) -> None:
    with no_grad():
        image = fc_model.as_transposed()(Tensor(rng.standard_normal((4, 3)) * 10))
    assert image.data.min() >= 0.0 and image.data.max() <= 1.0


def test_updating_storage_changes_both_views(fc_model: Model) -> None:
    transposed = fc_model.as_transposed()
    index = next(i for i, layer in enumerate(fc_model.layers) if layer.kind == "linear")
    t_index = len(fc_model.layers) - 1 - index
    view = transposed.weight_view(t_index)
    assert np.shares_memory(view, fc_model.weight_view(index))
    np.testing.assert_array_equal(view, fc_model.weight_view(index).T)
    fc_model.params[fc_model.layers[index].params["weight"]].data[0, 0] = 42.0
    assert transposed.weight_view(t_index)[0, 0] == 42.0


def test_transposed_parameters_use_their_own_bias(fc_model: Model) -> None:
    forward_ids = {id(p) for p in fc_model.parameters()}
    transposed_ids = {id(p) for p in fc_model.as_transposed().parameters()}
    assert forward_ids != transposed_ids
    weights = {id(fc_model.params[k]) for k in fc_model.params if k.endswith(".weight")}
    assert weights <= forward_ids & transposed_ids


def test_conv_layer_becomes_deconv() -> None:
    model = build_model([LayerSpec(kind="conv2d", channels=4, kernel=3, stride=2)], (2, 7, 7))
    layer = transpose_layer(model.layers[0])
    assert layer.kind == "deconv2d"
    assert layer.channels == 2
    assert layer.out_shape == (2, 7, 7)


def test_pool_becomes_upsample_with_crop() -> None:
    model = build_model([LayerSpec(kind="pool2d", size=2)], (1, 5, 5))
    assert model.output_shape == (1, 3, 3)
    with no_grad():
        out = model.transpose()(Tensor(np.ones((1, 1, 3, 3))))
    assert out.shape == (1, 1, 5, 5)


def test_incompatible_specs_name_the_layer() -> None:
    specs = [LayerSpec(kind="flatten"), LayerSpec(kind="conv2d", channels=2)]
    with pytest.raises(ConstructionError) as info:
        build_model(specs, (1, 4, 4))
    assert info.value.layer_index == 1


def test_empty_model_is_rejected() -> None:
    with pytest.raises(ConstructionError):
        build_model([], (1, 4, 4))


def test_wrong_input_shape_is_a_dimension_error(fc_model: Model) -> None:
    with pytest.raises(DimensionError):
        fc_model(Tensor(np.zeros((1, 1, 5, 5))))


def test_clone_is_independent(fc_model: Model) -> None:
    copy = fc_model.clone()
    key = next(iter(copy.params))
    copy.params[key].data[...] = 0.0
    assert not np.all(fc_model.params[key].data == 0.0)


def test_frozen_restores_requires_grad(fc_model: Model) -> None:
    with fc_model.frozen():
        assert not any(t.requires_grad for t in fc_model.params.values())
    assert all(t.requires_grad for t in fc_model.params.values())


def test_transposed_linear_is_the_matrix_transpose() -> None:
    layer = LayerSpec(kind="linear", units=3, bias=False, transpose_activation="identity")
    model = build_model([layer], (4,), seed=0)
    weight = model.params["layer0.weight"].data
    weight[...] = np.arange(-6, 6, dtype=np.float32).reshape(4, 3)
    x = np.array([[1.0, -2.0, 3.0, 0.5]], dtype=np.float32)
    v = np.array([[2.0, -1.0, 4.0]], dtype=np.float32)
    with no_grad():
        forward = model(Tensor(x)).data
        transposed = model.transpose()(Tensor(v)).data
    np.testing.assert_array_equal(forward, x @ weight)
    np.testing.assert_array_equal(transposed, (weight @ v.T).T)
