"""Photon-assisted quasiparticle tunneling in driven Josephson junctions and its effect on a coupled resonator."""
__version__ = "0.1.0"
