"""Test suite for gmf-partition"""
