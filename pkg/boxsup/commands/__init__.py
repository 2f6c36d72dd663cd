"""
Subcomandos da linha de comando
"""
from boxsup.commands import evaluate, gradcheck, infer, propose, synth, train

# Ordem em que aparecem no --help
COMMANDS = [synth, propose, train, infer, evaluate, gradcheck]

__all__ = ["COMMANDS"]
