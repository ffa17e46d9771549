"""Network description: two sensor areas, two aggregators, one sink."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .channel import ChannelParams, LinkGeometry
from .errors import InvalidParameterError


@dataclass(frozen=True)
class Geometry:
    """Link set, one entry per area (sensor links) or per aggregator."""
    sensor_sink: tuple
    sensor_agg: tuple
    agg_sink: tuple

    @classmethod
    def symmetric(cls, d_sensor_sink=130.0, d_sensor_agg=60.0, d_agg_sink=80.0,
                  sensor_power=1e-3, agg_power=1e-2, path_loss_exp=4.0, fading=1.0):
        s = LinkGeometry(d_sensor_sink, sensor_power, path_loss_exp, fading)
        a = LinkGeometry(d_sensor_agg, sensor_power, path_loss_exp, fading)
        r = LinkGeometry(d_agg_sink, agg_power, path_loss_exp, fading)
        return cls((s, s), (a, a), (r, r))


# 130 m sensor-sink, 60 m sensor-aggregator, 80 m aggregator-sink; 1 mW / 10 mW; theta = 4.
REFERENCE_GEOMETRY = Geometry.symmetric()

# Receiver noise power that reproduces the reference stability classification
# for the reference geometry (-80 dBm).
CALIBRATED_NOISE = 1e-11


@dataclass(frozen=True)
class NetworkConfig:
    m1: int
    m2: int
    t1: float = 0.1
    t2: float = 0.1
    alpha1: float = 0.8
    alpha2: float = 0.8
    geometry: Geometry = field(default=REFERENCE_GEOMETRY)
    channel: ChannelParams = field(default_factory=lambda: ChannelParams(gamma=0.5))

    def __post_init__(self):
        for name in ("m1", "m2"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise InvalidParameterError(f"{name} must be a non-negative integer, got {v!r}")
        for name in ("t1", "t2", "alpha1", "alpha2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v!r}")

    @classmethod
    def symmetric(cls, m, t, alpha=0.8, gamma=0.5, noise=0.0, geometry=REFERENCE_GEOMETRY):
        return cls(m, m, t, t, alpha, alpha, geometry, ChannelParams(gamma, noise))

    def with_(self, **kw) -> "NetworkConfig":
        """Copy with fields replaced; ``gamma``/``noise`` update the channel."""
        ch = self.channel
        if "gamma" in kw or "noise" in kw:
            ch = ChannelParams(kw.pop("gamma", ch.gamma), kw.pop("noise", ch.noise_power))
            kw["channel"] = ch
        if "m" in kw:
            kw["m1"] = kw["m2"] = kw.pop("m")
        if "t" in kw:
            kw["t1"] = kw["t2"] = kw.pop("t")
        if "alpha" in kw:
            kw["alpha1"] = kw["alpha2"] = kw.pop("alpha")
        return replace(self, **kw)

    @property
    def is_symmetric(self) -> bool:
        g = self.geometry
        return (self.m1 == self.m2 and self.t1 == self.t2 and self.alpha1 == self.alpha2
                and g.sensor_sink[0] == g.sensor_sink[1] and g.sensor_agg[0] == g.sensor_agg[1]
                and g.agg_sink[0] == g.agg_sink[1])
