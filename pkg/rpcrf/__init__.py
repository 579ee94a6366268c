"""Regular-pattern CRFs: linear-chain CRFs with regular-expression label patterns"""
