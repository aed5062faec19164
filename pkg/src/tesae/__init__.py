"""Tree echo state autoencoders: grammar-guided tree codes from fixed random reservoirs."""
from .autoencoder import TesaeHyperParams, TesaeModel, decode, encode, train
from .data import boolean_grammar, expressions_grammar, gen_boolean, gen_expressions
from .esae import EsaeHyperParams, EsaeModel, seq_train
from .grammar import Derivation, Grammar, Tree, load_grammar, parse_tree, parse_with_grammar, print_tree, replay
from .modelfile import load_model, save_model
from .ted import rmse, tree_edit_distance

__version__ = "0.1.0"

__all__ = [
    "Derivation", "EsaeHyperParams", "EsaeModel", "Grammar", "TesaeHyperParams", "TesaeModel", "Tree",
    "boolean_grammar", "decode", "encode", "expressions_grammar", "gen_boolean", "gen_expressions",
    "load_grammar", "load_model", "parse_tree", "parse_with_grammar", "print_tree", "replay", "rmse",
    "save_model", "seq_train", "train", "tree_edit_distance",
]
