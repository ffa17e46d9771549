"""Throughput, stability and delay analysis of sensor networks with two relaying aggregators."""
from .channel import (ChannelParams, JointOutcome, LinkGeometry, SuccessTables, build_tables,
                      joint_two_tx, joint_two_tx_mc, marginal_success, received_power_factor)
from .network import CALIBRATED_NOISE, REFERENCE_GEOMETRY, Geometry, NetworkConfig

__version__ = "0.1.0"
