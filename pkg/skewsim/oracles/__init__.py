"""Quadrature, random-walk and analytic checks of the densities"""
