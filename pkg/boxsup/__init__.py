"""
BoxSup: treino de segmentação semântica supervisionado por caixas
"""
__version__ = "1.0.0"
