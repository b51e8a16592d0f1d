# septoskill tests
