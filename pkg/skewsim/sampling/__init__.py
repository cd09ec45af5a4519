"""Exact rejection sampling and random streams"""
