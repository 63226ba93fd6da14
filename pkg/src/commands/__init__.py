"""
Commands Package for GyroLab
"""
