package methods

type A struct{}
type B struct{}

func (A) Close() error { return nil }

func (b B) Close() error { return nil }

func (b *B) Open() error { return nil }

func Close() {}

func Unique() {}
