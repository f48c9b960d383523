"""Small feature datasets built from the generator."""

import dataclasses

from setplay_fcm.datagen import FamilySpec, generate_named_corpus, reference_specs
from setplay_fcm.model import features_from_text


def features(specs):
    return [dataclasses.replace(features_from_text(text), name=name) for name, text in generate_named_corpus(specs)]


def reference_corpus(seed=0, jitter=0.1, swap_prob=0.1):
    return features(reference_specs(seed, jitter, swap_prob))


def family(mode, count, seed=0, **kw):
    return features([FamilySpec(mode, count, seed=seed, **kw)])
