"""The vocalfold package.

Contains the feature extraction, reduction and classification pipeline that detects vocal fold pathologies from
recordings of sustained vowels, a synthetic vowel generator to exercise it, and the cross-validation experiments.
"""
