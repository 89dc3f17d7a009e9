"""Ergodicity and antithetic-control certificates for stochastic reaction networks."""

__version__ = "0.1.0"

from .model import (CharacteristicModel, ParameterDomain, ParseError, Reaction,
                    ReactionNetwork, characteristic_model, decompose, load_network,
                    parse_network)

__all__ = ["__version__", "CharacteristicModel", "ParameterDomain", "ParseError", "Reaction",
           "ReactionNetwork", "characteristic_model", "decompose", "load_network",
           "parse_network"]
