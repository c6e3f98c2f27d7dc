"""Numerical kernel: special functions, distributions, EM, selection, preprocessing"""
