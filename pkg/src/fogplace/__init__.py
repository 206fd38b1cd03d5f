"""Placement of VNF forwarding graphs on hybrid cloud/fog networks with mobile fog nodes."""

__version__ = "0.1.0"
