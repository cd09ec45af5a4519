"""Transition densities and the special functions behind them"""
