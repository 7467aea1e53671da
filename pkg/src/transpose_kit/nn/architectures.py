"""
Named architecture presets.

Each preset returns the layer list and input shape for `build_model`. The
names follow the experiments they serve: `mnist_fc` / `mnist_cnn` for
28×28 grayscale digits, `cifar_cnn` for 3-channel images and `tiny_vit`
for a small vision transformer.
"""

from __future__ import annotations

from collections.abc import Callable

from transpose_kit.errors import ConfigError

from .layers import LayerSpec, Shape

Preset = tuple[list[LayerSpec], Shape]


def mnist_fc(
    width: int = 1024,
    depth: int = 3,
    classes: int = 10,
    image_shape: Shape = (1, 28, 28),
    activation: str = "relu",
) -> Preset:
    """Flatten, `depth` hidden layers of `width` units, then a linear classifier."""
    layers = [LayerSpec(kind="flatten")]
    layers += [LayerSpec(kind="linear", units=width, activation=activation) for _ in range(depth)]
    layers.append(LayerSpec(kind="linear", units=classes))
    return layers, image_shape


def mnist_cnn(
    channels: int = 128,
    depth: int = 3,
    classes: int = 10,
    image_shape: Shape = (1, 28, 28),
    pool: str = "avg",
) -> Preset:
    """`depth` conv(3×3, pad 1) + pool(2) stages, then flatten and a linear classifier."""
    layers: list[LayerSpec] = []
    for _ in range(depth):
        layers.append(
            LayerSpec(kind="conv2d", channels=channels, kernel=3, padding=1, activation="relu")
        )
        layers.append(LayerSpec(kind="pool2d", size=2, pool=pool))  # type: ignore[arg-type]
    layers += [LayerSpec(kind="flatten"), LayerSpec(kind="linear", units=classes)]
    return layers, image_shape


def cifar_cnn(
    channels: int = 64, depth: int = 2, classes: int = 10, image_shape: Shape = (3, 32, 32)
) -> Preset:
    return mnist_cnn(channels=channels, depth=depth, classes=classes, image_shape=image_shape)


def tiny_vit(
    embed_dim: int = 32,
    blocks: int = 2,
    heads: int = 4,
    patch: int = 4,
    classes: int = 10,
    image_shape: Shape = (1, 28, 28),
) -> Preset:
    """Patch projection, positional encoding, transformer blocks, token pooling, classifier."""
    layers = [
        LayerSpec(kind="conv2d", channels=embed_dim, kernel=patch, stride=patch),
        LayerSpec(kind="to_tokens"),
        LayerSpec(kind="positional_encoding"),
    ]
    layers += [
        LayerSpec(kind="transformer_block", heads=heads, mlp_dim=3 * embed_dim)
        for _ in range(blocks)
    ]
    layers += [LayerSpec(kind="token_pool"), LayerSpec(kind="linear", units=classes)]
    return layers, image_shape


PRESETS: dict[str, Callable[..., Preset]] = {
    "mnist_fc": mnist_fc,
    "mnist_cnn": mnist_cnn,
    "cifar_cnn": cifar_cnn,
    "tiny_vit": tiny_vit,
}


def parse_preset(text: str) -> tuple[str, dict[str, int | str]]:
    """
    Parse `name[:key=value,...]`, e.g. `mnist_fc:width=512,depth=3`.

    Raises:
        ConfigError: for an unknown preset or a malformed option.
    """
    name, _, options = text.partition(":")
    if name not in PRESETS:
        raise ConfigError(f"unknown architecture preset '{name}' (known: {', '.join(PRESETS)})")
    kwargs: dict[str, int | str] = {}
    for item in filter(None, options.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"malformed preset option '{item}'")
        kwargs[key.strip()] = int(value) if value.strip().lstrip("-").isdigit() else value.strip()
    return name, kwargs


def preset(name: str, **kwargs: object) -> Preset:
    """
    Build the layer list of a named preset.

    Raises:
        ConfigError: for an unknown preset or an option it does not take.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown architecture preset '{name}'")
    try:
        return PRESETS[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad options for preset '{name}': {exc}") from exc


__all__ = ["PRESETS", "Preset", "mnist_fc", "mnist_cnn", "cifar_cnn", "tiny_vit", "preset", "parse_preset"]
