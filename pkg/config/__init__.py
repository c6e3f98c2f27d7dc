"""Defaults and SEAFLOOR_* overrides"""
