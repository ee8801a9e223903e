"""
Test suite for emodiff.
This package contains the test modules for the autodiff engine, the audio
front end, the diffusion core, the networks, training and the protocols.
"""
