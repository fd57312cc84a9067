"""Utility modules: configuration, exceptions, logging and output"""
