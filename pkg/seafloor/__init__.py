"""Seafloor scattering mixtures: domain models and command line"""
